use std::process::ExitCode;

fn main() -> ExitCode {
    match wapf_cli::main_with(std::env::args_os()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(if f.category == "usage" { 2 } else { 1 })
        }
    }
}
