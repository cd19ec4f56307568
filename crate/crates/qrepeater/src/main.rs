fn main() {
    std::process::exit(qrepeater::cli::main_with(std::env::args_os()));
}
