fn main() {
    std::process::exit(ncvi_cli::run(std::env::args_os()));
}
