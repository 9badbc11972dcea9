fn main() {
    std::process::exit(frosting::cli::dispatch(std::env::args_os()));
}
