use std::process::ExitCode;

fn main() -> ExitCode {
    catm::cli::main()
}
