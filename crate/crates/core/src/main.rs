fn main() {
    std::process::exit(noma_hudn::engine::cli::main_with_args(std::env::args_os()));
}
