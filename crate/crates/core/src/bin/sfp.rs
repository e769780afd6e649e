fn main() {
    std::process::exit(sfp_core::cli::run(std::env::args_os()));
}
