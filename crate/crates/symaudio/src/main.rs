fn main() {
    std::process::exit(symaudio::cli::dispatch(std::env::args_os()));
}
