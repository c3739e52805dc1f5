fn main() {
    std::process::exit(surrloss::cli::run(std::env::args_os()));
}
