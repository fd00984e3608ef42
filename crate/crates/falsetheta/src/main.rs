fn main() {
    std::process::exit(falsetheta::cli::run());
}
