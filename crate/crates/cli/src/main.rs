use std::process::ExitCode;

fn main() -> ExitCode {
    agentmix_cli::run_cli()
}
