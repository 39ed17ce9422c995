use std::process::ExitCode;

fn main() -> ExitCode {
    tpsgtr::cli::main()
}
