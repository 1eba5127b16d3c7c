fn main() {
    std::process::exit(regvar_cli::run(std::env::args_os()));
}
