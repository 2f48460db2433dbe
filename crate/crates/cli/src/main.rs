fn main() {
    std::process::exit(datum_worth_cli::run(std::env::args_os()));
}
