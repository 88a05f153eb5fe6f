use std::io::{self, Write};

fn main() {
    let mut out = io::stdout().lock();
    let code = mlearn::cli::main_with_args(std::env::args_os(), &mut out, &mut io::stderr().lock());
    let _ = out.flush();
    std::process::exit(code);
}
