fn main() {
    match sandpile_cli::parse_args(std::env::args_os().skip(1)) {
        Ok(spec) => std::process::exit(sandpile_cli::run(&spec)),
        Err(e) => e.exit(),
    }
}
