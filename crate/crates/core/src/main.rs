fn main() {
    std::process::exit(hardy_radial::cli::run(std::env::args_os()));
}
