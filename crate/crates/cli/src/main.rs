fn main() {
    std::process::exit(mape_regress_cli::run(std::env::args_os()));
}
