fn main() {
    std::process::exit(stochdiag_cli::run(std::env::args_os()));
}
