fn main() {
    let code = wmprop::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
