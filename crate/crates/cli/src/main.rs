fn main() {
    std::process::exit(nild_cli::main_with(std::env::args_os()));
}
