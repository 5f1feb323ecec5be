fn main() {
    std::process::exit(infoloss::cli::main_with_args());
}
