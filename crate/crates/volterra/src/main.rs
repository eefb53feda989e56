fn main() {
    std::process::exit(volterra::cli::dispatch(std::env::args()));
}
