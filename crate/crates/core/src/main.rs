fn main() {
    std::process::exit(kannan_fixpoint::cli::run_cli(std::env::args_os()));
}
