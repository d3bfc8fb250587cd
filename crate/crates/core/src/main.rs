fn main() {
    std::process::exit(phlosar::cli::run(std::env::args_os()));
}
