fn main() {
    std::process::exit(extremal_lab::cli::run(std::env::args_os()));
}
