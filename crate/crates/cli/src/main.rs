fn main() {
    std::process::exit(plic_cli::run(std::env::args_os()));
}
