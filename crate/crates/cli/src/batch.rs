//! `--batch FILE`: one command line per line, run in parallel with
//! private output buffers, reported in file order.

use std::path::Path;

use crate::commands::{run_args, Io};
use crate::error::{CliError, CliResult};
use crate::statefile::read_bytes;

/// A parsed batch line.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub line: usize,
    pub args: Vec<String>,
}

/// Splits batch text into jobs, skipping blank lines and `#` comments.
pub fn parse_jobs(text: &str) -> Vec<Job> {
    text.lines()
        .enumerate()
        .filter_map(|(k, raw)| {
            let body = raw.split('#').next().unwrap_or("").trim();
            (!body.is_empty()).then(|| Job {
                line: k + 1,
                args: body.split_whitespace().map(str::to_string).collect(),
            })
        })
        .collect()
}

struct JobOutput {
    code: u8,
    out: Vec<u8>,
    err: Vec<u8>,
}

pub fn run_batch(path: &Path, io: &mut Io<'_>) -> CliResult<u8> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    let jobs = parse_jobs(&text);
    if jobs.iter().any(|j| j.args.iter().any(|a| a == "--batch")) {
        return Err(CliError::invalid(path, "batch jobs may not nest --batch"));
    }
    let results: Vec<JobOutput> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|job| {
                s.spawn(move || {
                    let (mut out, mut err) = (Vec::new(), Vec::new());
                    let mut stdin = std::io::empty();
                    let code = run_args(
                        &job.args,
                        &mut Io {
                            out: &mut out,
                            err: &mut err,
                            stdin: &mut stdin,
                        },
                    );
                    JobOutput { code, out, err }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("batch job panicked"))
            .collect()
    });

    let io_err = |source| CliError::Io {
        path: "<stdout>".into(),
        source,
    };
    let mut worst = 0;
    for (job, res) in jobs.iter().zip(&results) {
        writeln!(io.out, "== job line {}: {}", job.line, job.args.join(" ")).map_err(io_err)?;
        io.out.write_all(&res.out).map_err(io_err)?;
        io.err.write_all(&res.err).map_err(io_err)?;
        writeln!(io.out, "== job line {} exit {}", job.line, res.code).map_err(io_err)?;
        worst = worst.max(res.code);
    }
    Ok(worst)
}
