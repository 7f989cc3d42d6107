fn main() {
    std::process::exit(geomclass::cli::run(std::env::args_os()));
}
