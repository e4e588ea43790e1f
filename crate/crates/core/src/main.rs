fn main() {
    std::process::exit(ellipso_geo::cli::run(std::env::args_os()));
}
