fn main() { std::process::exit(sdfad::cli::main_from_env()) }
