//! Command-line front end: train, evaluate, and draw social navigation runs.
//! Exit code 0 on success, 1 for usage and configuration mistakes, 2 when a
//! run itself fails.

mod commands;
pub mod config;
pub mod svg;

use std::fmt;
use std::str::FromStr;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

const USAGE: &str = "\
usage: colson <command> [flags]

commands:
  train     train a policy; writes checkpoints, metrics, and a report
  collect   roll out the reciprocal planner and save demonstrations
  eval      score a policy over many seeded episodes
  compare   run guidance modes over identical episodes, side by side
  rollout   run a few episodes and draw the trajectories
  sweep     evaluate across pedestrian counts and plot the curve
  plot      turn a trajectory log into a picture
  help      print this text

common flags:
  --config <file>      TOML run configuration
  --set key=value      override one config key (repeatable, dotted path)
  --out <dir>          run directory for artifacts (default: run)
  --jobs <n>           evaluation worker threads (0 = all cores)

train:
  --episodes <n>       training episodes
  --seed <n>           master seed for weights and episode draws
  --checkpoint <file>  weights to resume from

collect / eval / compare / rollout / sweep:
  --episodes <n>       episode count (rollout defaults to 1)
  --seed <n>           first episode seed
  --policy <name>      orca | straight | random | diffusion
  --checkpoint <file>  weights for the diffusion policy
  --mode <name>        plain | smooth | obstacle
  --modes <a,b,..>     compare: which modes to pair up
  --peds <n>           pedestrian count
  --scenario <name>    circle | wall
  --visible            crowd reacts to the robot
  --invisible          crowd ignores the robot
  --counts <a,b,..>    sweep: pedestrian counts

plot:
  --log <file>         trajectory log (json lines)
  --out <file>         picture path (default: the log with .svg)
";

/// Parsed flags: `--name value`, `--name=value`, and bare switches.
#[derive(Debug)]
pub(crate) struct Args {
    values: Vec<(String, String)>,
    switches: Vec<String>,
}

impl Args {
    fn parse(rest: &[String], values: &[&str], switches: &[&str]) -> Result<Args, CliError> {
        let mut out = Args { values: Vec::new(), switches: Vec::new() };
        let mut it = rest.iter();
        while let Some(arg) = it.next() {
            let Some(name) = arg.strip_prefix("--") else {
                return Err(CliError::Usage(format!("unexpected argument {arg:?}")));
            };
            if let Some((n, v)) = name.split_once('=') {
                if values.contains(&n) {
                    out.values.push((n.to_string(), v.to_string()));
                    continue;
                }
                return Err(CliError::Usage(format!("unknown flag --{n}")));
            }
            if switches.contains(&name) {
                out.switches.push(name.to_string());
            } else if values.contains(&name) {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--{name} needs a value")))?;
                out.values.push((name.to_string(), v.clone()));
            } else {
                return Err(CliError::Usage(format!("unknown flag --{name}")));
            }
        }
        Ok(out)
    }

    /// Last occurrence wins, matching how overrides layer.
    pub(crate) fn value(&self, name: &str) -> Option<&str> {
        self.values.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub(crate) fn values_of(&self, name: &str) -> Vec<String> {
        self.values.iter().filter(|(n, _)| n == name).map(|(_, v)| v.clone()).collect()
    }

    pub(crate) fn switch(&self, name: &str) -> bool {
        self.switches.iter().any(|s| s == name)
    }

    pub(crate) fn parsed<T: FromStr>(&self, name: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.value(name) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("bad value for --{name}: {e}"))),
        }
    }
}

const COMMON: [&str; 4] = ["config", "set", "out", "jobs"];
const EVAL_VALUES: [&str; 6] = ["episodes", "seed", "checkpoint", "peds", "scenario", "mode"];
const EVAL_SWITCHES: [&str; 2] = ["visible", "invisible"];

fn with_common(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = COMMON.to_vec();
    v.extend_from_slice(extra);
    v
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let Some(command) = args.first() else {
        return Err(CliError::Usage("missing command".into()));
    };
    let rest = &args[1..];
    let eval_flags = with_common(&EVAL_VALUES);
    match command.as_str() {
        "train" => {
            let a = Args::parse(rest, &with_common(&["episodes", "seed", "checkpoint"]), &[])?;
            commands::train(&a)
        }
        "collect" => {
            let a = Args::parse(rest, &with_common(&["episodes", "seed", "peds", "scenario"]), &[])?;
            commands::collect(&a)
        }
        "eval" => {
            let mut flags = eval_flags.clone();
            flags.push("policy");
            let a = Args::parse(rest, &flags, &EVAL_SWITCHES)?;
            commands::eval(&a)
        }
        "compare" => {
            let mut flags = eval_flags.clone();
            flags.push("modes");
            let a = Args::parse(rest, &flags, &EVAL_SWITCHES)?;
            commands::compare(&a)
        }
        "rollout" => {
            let mut flags = eval_flags.clone();
            flags.push("policy");
            let a = Args::parse(rest, &flags, &EVAL_SWITCHES)?;
            commands::rollout(&a)
        }
        "sweep" => {
            let mut flags = eval_flags.clone();
            flags.push("policy");
            flags.push("counts");
            let a = Args::parse(rest, &flags, &EVAL_SWITCHES)?;
            commands::sweep(&a)
        }
        "plot" => {
            let a = Args::parse(rest, &["log", "out"], &[])?;
            commands::plot(&a)
        }
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("run `colson help` for usage");
            1
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flags_parse_in_both_spellings() {
        let a = Args::parse(
            &strings(&["--episodes", "5", "--set", "a=1", "--set=b=2", "--visible"]),
            &["episodes", "set"],
            &["visible"],
        )
        .unwrap();
        assert_eq!(a.parsed::<usize>("episodes").unwrap(), Some(5));
        assert_eq!(a.values_of("set"), vec!["a=1".to_string(), "b=2".to_string()]);
        assert!(a.switch("visible"));
        assert!(!a.switch("invisible"));
    }

    #[test]
    fn repeated_value_flags_keep_the_last() {
        let a = Args::parse(
            &strings(&["--seed", "1", "--seed", "7"]),
            &["seed"],
            &[],
        )
        .unwrap();
        assert_eq!(a.value("seed"), Some("7"));
    }

    #[test]
    fn stray_input_is_rejected() {
        for bad in [&["positional"][..], &["--nope", "1"], &["--seed"]] {
            let err = Args::parse(&strings(bad), &["seed"], &[]).unwrap_err();
            assert!(matches!(err, CliError::Usage(_)));
        }
    }

    #[test]
    fn unknown_numbers_report_the_flag() {
        let a = Args::parse(&strings(&["--seed", "abc"]), &["seed"], &[]).unwrap();
        let err = a.parsed::<u64>("seed").unwrap_err();
        assert!(err.to_string().contains("--seed"));
    }

    #[test]
    fn top_level_dispatch_flags_errors() {
        assert!(matches!(dispatch(&[]), Err(CliError::Usage(_))));
        assert!(matches!(dispatch(&strings(&["frobnicate"])), Err(CliError::Usage(_))));
    }
}
