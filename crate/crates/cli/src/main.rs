use std::io;

fn main() {
    let code = pointsim_cli::commands::main_with(std::env::args(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
