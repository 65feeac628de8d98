fn main() {
    std::process::exit(dipole_flow::cli::run(std::env::args_os()));
}
