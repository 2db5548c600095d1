fn main() {
    std::process::exit(pypi_census::cli::run(std::env::args_os()));
}
