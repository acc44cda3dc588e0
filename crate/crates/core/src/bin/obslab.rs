use std::process::ExitCode;

fn main() -> ExitCode {
    obslab::cli::main_entry()
}
