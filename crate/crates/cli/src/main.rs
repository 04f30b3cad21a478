//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error, 3 solver
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use oscswap_cli::config::Frequency;
use oscswap_cli::{plot, presets, run, validate};
use oscswap_core::hamiltonians;
use oscswap_core::protocol;
use oscswap_core::states::{OscKind, OscState, Parity};
use oscswap_core::Error as CoreError;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("OSCSWAP_PROFILE"),
    ", ",
    env!("OSCSWAP_TARGET"),
    ")"
);

#[derive(Parser)]
#[command(
    name = "oscswap",
    about = "Conditional-swap entangling of two oscillators: scenario runner and validators",
    version,
    long_version = LONG_VERSION
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the fidelity trajectory.
    Simulate(SimulateArgs),
    /// Parameter utilities.
    #[command(subcommand)]
    Params(ParamsCommand),
    /// Ideal-protocol utilities.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Run a built-in validation suite.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Bundled scenario name (fig2a…fig2d, optionally with -ideal) or a
    /// TOML file path.
    #[arg(long)]
    scenario: String,
    /// Override both oscillator truncations.
    #[arg(long)]
    truncation: Option<usize>,
    /// CSV output path (defaults to <name>.csv).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also render an SVG fidelity plot.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Print the resolved scenario as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum ParamsCommand {
    /// Solve the matching relations for g_b and the pulse Rabi frequency.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Oscillator-a coupling, e.g. "60 MHz".
    #[arg(long)]
    ga: String,
    /// Oscillator-a detuning, e.g. "1.5 GHz".
    #[arg(long)]
    da: String,
    /// Pulse detuning, e.g. "1.25 GHz".
    #[arg(long)]
    d: String,
    /// Matched Raman detuning, e.g. "0.25 GHz".
    #[arg(long)]
    delta: String,
    /// Phase-matching index k.
    #[arg(long, default_value_t = 1)]
    k: u32,
}

#[derive(Subcommand)]
enum ProtocolCommand {
    /// Run the ideal protocol and report the post-selection branches.
    Run(ProtocolRunArgs),
    /// Verify the SWAP gate on a {φ, φ̄}-encoded qubit.
    SwapCheck(SwapCheckArgs),
}

#[derive(Args)]
struct ProtocolRunArgs {
    /// State of oscillator a: vacuum, fock:n, coherent:α, squeezed:ξ, cat:±:α.
    #[arg(long)]
    phi: String,
    /// State of oscillator b.
    #[arg(long)]
    phibar: String,
    /// Coupler weight on g′ (real or re,im); renormalized with --beta.
    #[arg(long, default_value = "0.7071067811865476")]
    alpha: String,
    /// Coupler weight on g.
    #[arg(long, default_value = "0.7071067811865476")]
    beta: String,
    #[arg(long, default_value_t = 15)]
    truncation: usize,
}

#[derive(Args)]
struct SwapCheckArgs {
    #[arg(long)]
    phi: String,
    #[arg(long)]
    phibar: String,
    #[arg(long, default_value_t = 15)]
    truncation: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Suite name: algebra, params, swap, or all.
    #[arg(long)]
    suite: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

fn classify(e: &anyhow::Error) -> u8 {
    if let Some(core) = e.downcast_ref::<CoreError>() {
        match core {
            CoreError::Stiffness(_) | CoreError::SolverFailure(_) => 3,
            _ => 2,
        }
    } else {
        2
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Params(ParamsCommand::Solve(args)) => params_solve(args),
        Command::Protocol(ProtocolCommand::Run(args)) => protocol_run(args),
        Command::Protocol(ProtocolCommand::SwapCheck(args)) => swap_check(args),
        Command::Validate(args) => {
            let results = validate::run_suite(&args.suite)?;
            let ok = validate::report(&results);
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut scenario = presets::load_scenario(&args.scenario)?;
    if let Some(n) = args.truncation {
        scenario = scenario.with_truncation(n);
    }
    if args.print_config {
        print!("{}", scenario.to_toml()?);
        return Ok(ExitCode::SUCCESS);
    }
    let resolved = run::resolve(&scenario)?;
    eprintln!(
        "running scenario '{}' ({} mode, horizon {:.4} us)",
        scenario.name,
        if resolved.closed { "closed" } else { "open" },
        scenario.run.horizon.seconds() * 1e6
    );
    let trajectory = run::run(&resolved)?;

    let output = args
        .output
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", scenario.name)));
    run::write_csv(&trajectory, &output)?;
    eprintln!("wrote {}", output.display());

    if let Some(plot_path) = args.plot {
        let svg = if resolved.closed {
            plot::fidelity_svg(&scenario.name, &trajectory, None, true)
        } else {
            // Add the decoherence-free trace for comparison.
            let ideal_scenario = scenario.idealized();
            let ideal = run::run_scenario(&ideal_scenario)?;
            plot::fidelity_svg(&scenario.name, &trajectory, Some(&ideal), false)
        };
        std::fs::write(&plot_path, svg)?;
        eprintln!("wrote {}", plot_path.display());
    }

    let last = trajectory.samples.last().expect("trajectory has samples");
    println!(
        "final sample: t = {:.6} us, fidelity = {:.9}, trace = {:.9}",
        last.time * 1e6,
        last.fidelity.unwrap_or(f64::NAN),
        last.trace
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_frequency(text: &str) -> anyhow::Result<f64> {
    let wrapped = format!("value = \"{text}\"");
    #[derive(serde::Deserialize)]
    struct Wrapper {
        value: Frequency,
    }
    let w: Wrapper = toml::from_str(&wrapped)
        .map_err(|e| anyhow::anyhow!("cannot parse frequency '{text}': {e}"))?;
    Ok(w.value.rad_per_sec())
}

fn params_solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let g_a = parse_frequency(&args.ga)?;
    let det_a = parse_frequency(&args.da)?;
    let det_pulse = parse_frequency(&args.d)?;
    let det_raman = parse_frequency(&args.delta)?;
    let solved = hamiltonians::solve_params(g_a, det_a, det_pulse, det_raman, args.k)?;
    let mhz = |x: f64| x / TWO_PI / 1e6;
    println!("solved parameters (k = {}):", args.k);
    println!("  g_a/2pi     = {:>12.6} MHz", mhz(solved.physical.g_a));
    println!("  g_b/2pi     = {:>12.6} MHz", mhz(solved.physical.g_b));
    println!("  rabi/2pi    = {:>12.6} MHz", mhz(solved.physical.rabi));
    println!(
        "  raman/2pi   = {:>12.6} MHz",
        mhz(solved.physical.raman_coupling())
    );
    println!("  det_a/2pi   = {:>12.6} MHz", mhz(solved.physical.det_a));
    println!(
        "  det_p/2pi   = {:>12.6} MHz",
        mhz(solved.physical.det_pulse)
    );
    println!("  det_b/2pi   = {:>12.6} MHz", mhz(solved.physical.det_b));
    println!("  lambda/2pi  = {:>12.6} MHz", mhz(solved.ideal.coupling));
    println!(
        "  shift/2pi   = {:>12.6} MHz",
        mhz(solved.ideal.freq_shift)
    );
    println!("  t_swap      = {:>12.6} us", solved.t_swap * 1e6);
    println!();
    println!("large-detuning margins (large/small):");
    let report = hamiltonians::check_detuning_conditions(&solved.physical);
    for c in &report.conditions {
        println!("  {:<55} {:>10.3}", c.name, c.ratio);
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_complex(text: &str) -> anyhow::Result<C64> {
    let parts: Vec<&str> = text.split(',').collect();
    match parts.as_slice() {
        [re] => Ok(C64::new(re.trim().parse()?, 0.0)),
        [re, im] => Ok(C64::new(re.trim().parse()?, im.trim().parse()?)),
        _ => anyhow::bail!("cannot parse complex number '{text}' (expected re or re,im)"),
    }
}

/// Parses a state mini-spec: vacuum, fock:n, coherent:α, squeezed:ξ,
/// cat:+:α, cat:-:α.
fn parse_state(text: &str, truncation: usize) -> anyhow::Result<OscState> {
    let parts: Vec<&str> = text.split(':').collect();
    let kind = match parts.as_slice() {
        ["vacuum"] => OscKind::Fock(0),
        ["fock", n] => OscKind::Fock(n.trim().parse()?),
        ["coherent", a] => OscKind::Coherent(parse_complex(a)?),
        ["squeezed", xi] => OscKind::Squeezed(parse_complex(xi)?),
        ["cat", p, a] => OscKind::Cat {
            alpha: parse_complex(a)?,
            parity: match *p {
                "+" => Parity::Plus,
                "-" => Parity::Minus,
                other => anyhow::bail!("cat parity must be + or -, got '{other}'"),
            },
        },
        _ => anyhow::bail!(
            "cannot parse state '{text}' (expected vacuum, fock:n, coherent:a, squeezed:xi, \
             or cat:+:a / cat:-:a)"
        ),
    };
    Ok(OscState::build(
        kind,
        truncation,
        oscswap_core::states::DEFAULT_TAIL_TOL,
    )?)
}

/// Phase-matched conditional parameters at the standard working point.
fn reference_ideal_params() -> anyhow::Result<hamiltonians::IdealParams> {
    let solved = hamiltonians::solve_params(
        TWO_PI * 60.0e6,
        TWO_PI * 1.5e9,
        TWO_PI * 1.25e9,
        TWO_PI * 0.25e9,
        1,
    )?;
    Ok(solved.ideal)
}

fn protocol_run(args: ProtocolRunArgs) -> anyhow::Result<ExitCode> {
    let phi = parse_state(&args.phi, args.truncation)?;
    let phi_bar = parse_state(&args.phibar, args.truncation)?;
    let mut alpha = parse_complex(&args.alpha)?;
    let mut beta = parse_complex(&args.beta)?;
    let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if norm < 1e-12 {
        anyhow::bail!("coupler weights are both zero");
    }
    alpha /= norm;
    beta /= norm;
    let params = reference_ideal_params()?;
    let dims = oscswap_core::hilbert::SystemDims::new(args.truncation, args.truncation)?;
    let result = protocol::run_protocol(&phi, &phi_bar, alpha, beta, &params, &dims)?;

    let target = protocol::ideal_pre_pulse_state(&phi, &phi_bar, alpha, beta)?;
    let overlap = target.inner(&result.pre_pulse_state)?.norm();
    println!("conditional evolution overlap with the ideal target: {overlap:.9}");
    for (name, branch, plus) in [
        ("g ", &result.branch_g, true),
        ("g'", &result.branch_gprime, false),
    ] {
        let entropy = oscswap_core::metrics::entanglement_entropy(
            &branch.state,
            &[oscswap_core::hilbert::Subsystem::OscA],
        )?;
        let target =
            protocol::EntangledTarget::new(phi.clone(), phi_bar.clone(), alpha, beta, plus)?;
        let (ket, weight) = target.normalized()?;
        let osc = branch.oscillator_ket()?;
        let branch_overlap = osc.inner(&ket)?.norm();
        println!(
            "branch {name}: probability {:.9} (formula {weight:.9}), \
             entanglement entropy {entropy:.6} nats, target overlap {branch_overlap:.9}",
            branch.probability
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn swap_check(args: SwapCheckArgs) -> anyhow::Result<ExitCode> {
    let phi = parse_state(&args.phi, args.truncation)?;
    let phi_bar = parse_state(&args.phibar, args.truncation)?;
    let params = reference_ideal_params()?;
    let dims = oscswap_core::hilbert::SystemDims::new(args.truncation, args.truncation)?;
    let report = protocol::swap_gate_check(&phi, &phi_bar, &params, &dims)?;
    let labels = ["phi,phi", "phi,phibar", "phibar,phi", "phibar,phibar"];
    for (label, infidelity) in labels.iter().zip(report.infidelities.iter()) {
        println!("{label:>14} -> infidelity {infidelity:.3e}");
    }
    println!("worst infidelity: {:.3e}", report.worst);
    Ok(ExitCode::SUCCESS)
}
