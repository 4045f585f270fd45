use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command as ClapCommand};

use sqrtdom::cli::{run, Command};
use sqrtdom::config::{ConfigLayers, RunConfig, KEYS};

const COMMANDS: [(Command, &str); 8] = [
    (Command::Assemble, "Write the form matrices and the assembled operator"),
    (Command::VerifyKato, "Check the factored resolvent identities against direct inversion"),
    (Command::VerifyKrein, "Check the rank-one resolvent formula, kernel structure and kernel bounds"),
    (Command::KappaStudy, "Square-root domain equivalence constants under mesh refinement"),
    (Command::DecayStudy, "Decay of the factored perturbation and multiplier norms in the shift"),
    (Command::KernelDump, "Tabulate the Green, square-root and T kernels"),
    (Command::HypothesisCheck, "Numerical range, accretivity, form bounds and factorization hypotheses"),
    (Command::TraceCheck, "Trace/determinant derivative identity by finite differences"),
];

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn cli() -> ClapCommand {
    let mut app = ClapCommand::new("sqrtdom")
        .about("Discrete square-root domain experiments for Sturm-Liouville operators")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (command, about) in COMMANDS {
        let mut sub = ClapCommand::new(command.name()).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("`key = value` file applied over the defaults"),
        );
        for &key in KEYS {
            let long: &'static str = Box::leak(flag(key).into_boxed_str());
            sub = sub.arg(Arg::new(key).long(long).value_name("VALUE").help(format!("override `{key}`")));
        }
        app = app.subcommand(sub);
    }
    app
}

fn layers(matches: &ArgMatches) -> Result<ConfigLayers, sqrtdom::config::ConfigError> {
    let mut layers = ConfigLayers::with_defaults();
    if let Some(path) = matches.get_one::<PathBuf>("config") {
        layers.apply_file(path)?;
    }
    for &key in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            layers.set(key, value)?;
        }
    }
    Ok(layers)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = COMMANDS.iter().map(|(c, _)| *c).find(|c| c.name() == name).expect("registered subcommand");
    let cfg = match layers(sub).and_then(|l| RunConfig::from_layers(&l)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("sqrtdom: {e}");
            return ExitCode::from(2);
        }
    };
    match run(command, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("sqrtdom {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
