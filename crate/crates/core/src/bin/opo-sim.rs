fn main() {
    std::process::exit(opo_sim::cli::main_with_args(std::env::args_os()));
}
