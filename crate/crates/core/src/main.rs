fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = tile_lab::cli::main_with_args(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
