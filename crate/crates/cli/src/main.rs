use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (mut stdout, mut stderr, mut stdin) = (std::io::stdout().lock(), std::io::stderr(), std::io::stdin().lock());
    let code = qmarginal_cli::run_args(
        &args,
        &mut qmarginal_cli::Io {
            out: &mut stdout,
            err: &mut stderr,
            stdin: &mut stdin,
        },
    );
    ExitCode::from(code)
}
