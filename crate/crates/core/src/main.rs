fn main() {
    std::process::exit(rainbow_trees::cli::dispatch(std::env::args_os()));
}
