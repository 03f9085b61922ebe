fn main() {
    let code = modalstat_cli::main_with(std::env::args_os().collect(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
