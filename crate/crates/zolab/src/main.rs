use std::io;

fn main() {
    let code = zolab::cli::main_with(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
