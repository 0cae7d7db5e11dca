fn main() {
    std::process::exit(semrsm::cli::main_with(std::env::args_os()));
}
