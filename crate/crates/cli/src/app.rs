//! Argument parsing and subcommand dispatch.

use std::path::PathBuf;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use clusterplot::dataset::write_text;
use clusterplot::render::{parse_geometry, render_outlines};
use clusterplot::toy;

use crate::config::{read_settings, resolve, Group, Settings, KEYS};
use crate::error::CliError;
use crate::pipeline::{self, write_artifacts};

fn key_args(cmd: Command, groups: &[Group]) -> Command {
    let mut cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key=value or JSON settings; flags override it"),
    );
    for k in KEYS.iter().filter(|k| groups.contains(&k.group)) {
        let mut a = Arg::new(k.name)
            .long(k.name)
            .help(format!("{} [default: {}]", k.help, k.default));
        if k.switch {
            a = a.num_args(0..=1).default_missing_value("true").value_name("BOOL");
        } else {
            a = a.value_name("VALUE");
        }
        cmd = cmd.arg(a);
    }
    cmd
}

pub fn command() -> Command {
    use Group::*;
    Command::new("clusterplot")
        .about("Blob diagrams of labeled high-dimensional data")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(key_args(
            Command::new("run").about("Full pipeline: relations, embedding, optimization, plots"),
            &[Data, Optimize, Render, Common],
        ))
        .subcommand(key_args(
            Command::new("measure").about("Original-space relation matrices only"),
            &[Data, Render, Common],
        ))
        .subcommand(
            key_args(
                Command::new("render").about("Plot from a saved geometry file"),
                &[Render, Common],
            )
            .arg(
                Arg::new("geometry")
                    .long("geometry")
                    .value_name("FILE")
                    .required(true)
                    .value_parser(value_parser!(PathBuf)),
            ),
        )
        .subcommand(
            Command::new("gen-toy")
                .about("Write a synthetic dataset as CSV")
                .arg(
                    Arg::new("name")
                        .required(true)
                        .value_parser(["hourglass", "cross", "gaussians"]),
                )
                .arg(num_arg("n", "total points (hourglass, cross)", "2000"))
                .arg(num_arg("classes", "gaussians: number of classes", "4"))
                .arg(num_arg("dim", "gaussians: dimensions", "8"))
                .arg(num_arg("per-class", "gaussians: points per class", "250"))
                .arg(num_arg("separation", "gaussians: centre distance in sigmas", "10"))
                .arg(num_arg("sigma", "gaussians: standard deviation", "1"))
                .arg(num_arg("seed", "seed", "0"))
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("FILE")
                        .required(true)
                        .value_parser(value_parser!(PathBuf)),
                ),
        )
}

fn num_arg(name: &'static str, help: &'static str, default: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .help(help)
        .default_value(default)
        .action(ArgAction::Set)
}

fn settings(m: &ArgMatches) -> Result<(Settings, Settings), CliError> {
    let file = match m.get_one::<String>("config") {
        Some(p) => read_settings(&PathBuf::from(p))?,
        None => Settings::new(),
    };
    let mut flags = Settings::new();
    for k in KEYS {
        if let Ok(Some(v)) = m.try_get_one::<String>(k.name) {
            flags.insert(k.name, v.clone());
        }
    }
    Ok((file, flags))
}

fn init_threads(n: usize) {
    if n > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already set up: {e}");
        }
    }
}

fn parsed<V: std::str::FromStr>(m: &ArgMatches, name: &str) -> Result<V, CliError> {
    let v = m.get_one::<String>(name).expect("has a default");
    v.parse()
        .map_err(|_| CliError::Config(format!("--{name}: cannot parse {v:?}")))
}

/// Runs one parsed invocation; returns the text to print on success.
pub fn dispatch(m: &ArgMatches) -> Result<String, CliError> {
    match m.subcommand() {
        Some((name @ ("run" | "measure"), sub)) => {
            let (file, flags) = settings(sub)?;
            let cfg = resolve(&file, &flags)?;
            init_threads(cfg.threads);
            let (arts, summary) = if name == "run" {
                pipeline::run(&cfg)?
            } else {
                pipeline::measure(&cfg)?
            };
            let manifest = write_artifacts(&cfg.out, &arts)?;
            let mut msg = format!(
                "{} points, {} anchors, {} artifacts",
                summary.points,
                summary.anchors,
                arts.len()
            );
            if let (Some(a), Some(b)) = (summary.initial_mae, summary.best_mae) {
                msg.push_str(&format!(", loss {a} -> {b}"));
            }
            msg.push_str(&format!("\nmanifest: {}", manifest.display()));
            Ok(msg)
        }
        Some(("render", sub)) => {
            let (file, mut flags) = settings(sub)?;
            if !file.contains_key("out") && !flags.contains_key("out") {
                flags.insert("out", "clusterplot.svg".into());
            }
            let cfg = resolve(&file, &flags)?;
            let path = sub.get_one::<PathBuf>("geometry").expect("required");
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let (names, blobs) = parse_geometry(&text, &path.display().to_string())
                .map_err(|e| CliError::stage("render", e))?;
            let svg = render_outlines(&blobs, &names, &cfg.render).map_err(|e| CliError::stage("render", e))?;
            std::fs::write(&cfg.out, svg)
                .map_err(|e| CliError::Pipeline(format!("writing {}: {e}", cfg.out.display())))?;
            Ok(format!("wrote {}", cfg.out.display()))
        }
        Some(("gen-toy", sub)) => {
            let seed: u64 = parsed(sub, "seed")?;
            let name = sub.get_one::<String>("name").expect("required");
            let ds = match name.as_str() {
                "hourglass" => toy::hourglass(parsed(sub, "n")?, seed),
                "cross" => toy::cross(parsed(sub, "n")?, seed),
                _ => toy::gaussians(
                    parsed(sub, "classes")?,
                    parsed(sub, "dim")?,
                    parsed(sub, "per-class")?,
                    parsed(sub, "separation")?,
                    parsed(sub, "sigma")?,
                    seed,
                ),
            }
            .map_err(|e| CliError::stage("gen-toy", e))?;
            let out = sub.get_one::<PathBuf>("out").expect("required");
            write_text(&ds, out).map_err(|e| CliError::Pipeline(format!("gen-toy: {e}")))?;
            Ok(format!("wrote {} points to {}", ds.len(), out.display()))
        }
        _ => unreachable!("subcommand required"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_run_key_is_a_flag() {
        command().debug_assert();
        let run = command();
        let run = run.find_subcommand("run").unwrap();
        for k in KEYS {
            assert!(run.get_arguments().any(|a| a.get_long() == Some(k.name)), "{}", k.name);
        }
    }

    #[test]
    fn switch_without_value() {
        let m = command()
            .try_get_matches_from(["clusterplot", "run", "--inter-label-only", "--k-overlap", "7"])
            .unwrap();
        let (_, flags) = settings(m.subcommand_matches("run").unwrap()).unwrap();
        assert_eq!(flags["inter-label-only"], "true");
        assert_eq!(flags["k-overlap"], "7");
        assert!(!flags.contains_key("lr"));
    }
}
