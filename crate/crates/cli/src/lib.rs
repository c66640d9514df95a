//! Command-line front end: every subcommand reads JSON files, writes JSON to
//! standard output (and optionally to `--out`), and reports diagnostics on
//! standard error.
//!
//! Exit codes: 0 success or satisfactory, 1 negative result (unsatisfactory,
//! no plan, unsatisfiable), 2 usage or validation error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pwl::bench::{verification_scaling, BenchConfig};
use pwl::domains::{
    gen_alarm_example, gen_door_example, gen_intro_example, gen_ma_goal_instances, gen_narrow_bridge, gen_random,
    gen_transport, TransportSpec,
};
use pwl::extended::{ext_simulate, ext_synthesize_with_stats, ext_verify, ExtendedSystem};
use pwl::multiagent::{ma_verify, reduce_goals, MaCaps, MultiAgentPlan, MultiAgentSystem};
use pwl::plan::PlanContext;
use pwl::reduction::{
    all_sign_patterns_cnf, assignment_from_plan, plan_from_assignment, system_from_cnf, Assignment, Cnf3,
};
use pwl::synth::{default_horizon, synthesize_with_stats};
use pwl::{shrink, simulate, verify, Dynamics, Limits, PlanTable, PwlError, PwlSystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "pwl", version, about = "Plan verification, shrinking and synthesis for systems with unknown behavior")]
pub struct Cli {
    /// Output format; JSON is the only one.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load and validate a system file (basic, extended or multi-agent).
    Validate(SystemArg),
    /// Verify a plan against every behavior.
    Verify(VerifyArgs),
    /// Run a plan under one behavior and print the trace.
    Simulate(SimulateArgs),
    /// Reduce a satisfactory plan to branches of at most s*t actions.
    Shrink(ShrinkArgs),
    /// Search for a satisfactory plan.
    Synthesize(SynthArgs),
    /// Build the planning system of a 3-CNF formula in DIMACS format.
    FromCnf(CnfArgs),
    /// Build the plan that encodes a satisfying assignment.
    PlanFromAssignment(AssignmentArgs),
    /// Read a satisfying assignment off a satisfactory plan.
    AssignmentFromPlan(DecodeArgs),
    /// Generate an instance.
    Gen(GenArgs),
    /// Verify a plan on a system whose behavior may change.
    ExtVerify(VerifyArgs),
    /// Search for a plan on a system whose behavior may change.
    ExtSynthesize(ExtSynthArgs),
    /// Verify a two-agent plan set.
    MaVerify(MaVerifyArgs),
    /// Rewrite a two-agent system so each agent has a single goal.
    ReduceGoals(OutSystemArgs),
    /// Measure verification time against the number of behaviors.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct SystemArg {
    #[arg(long)]
    pub system: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// Defaults to the plan's horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// Behavior name (initial candidate for extended systems).
    #[arg(long)]
    pub behavior: String,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ShrinkArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Defaults to s*t.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtSynthArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CnfArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AssignmentArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    /// One 0/1 digit per variable, variable 1 first.
    #[arg(long)]
    pub assignment: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
}

#[derive(Args, Debug)]
pub struct MaVerifyArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub horizon: usize,
}

#[derive(Args, Debug)]
pub struct OutSystemArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// JSON file overriding any of: behaviors, states, actions, horizon,
    /// repetitions, seed.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// The two-world sensing example.
    Intro,
    /// A transportation network described by a JSON spec.
    Transport {
        #[arg(long)]
        spec: PathBuf,
    },
    /// A seeded random system.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 3)]
        behaviors: usize,
        #[arg(long, default_value_t = 0.2)]
        goal_density: f64,
    },
    /// The planning system of a random 3-CNF (or of the 8-clause
    /// unsatisfiable formula with `--unsat`).
    Cnf {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        vars: usize,
        #[arg(long, default_value_t = 3)]
        clauses: usize,
        #[arg(long)]
        unsat: bool,
        /// Also write the formula in DIMACS format.
        #[arg(long)]
        dimacs_out: Option<PathBuf>,
    },
    /// Extended system: sensing with an alarm that turns the world hostile.
    Alarm,
    /// Extended system: a locked door that opens after a knock.
    Door,
    /// Two-agent narrow bridge.
    Bridge,
    /// One of the small two-goal, two-agent instances.
    Ma {
        #[arg(long)]
        name: String,
    },
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Negative(Value, String),
}

impl From<PwlError> for Failure {
    fn from(e: PwlError) -> Self {
        Failure::Usage(e.to_string())
    }
}

struct Success {
    stdout: Value,
    stderr: String,
    code: i32,
}

impl Success {
    fn ok(stdout: Value) -> Self {
        Success {
            stdout,
            stderr: String::new(),
            code: EXIT_OK,
        }
    }
}

type CmdResult = Result<Success, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Output {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    match dispatch(&cli.command) {
        Ok(s) => Output {
            code: s.code,
            stdout: render(&s.stdout),
            stderr: s.stderr,
        },
        Err(Failure::Usage(msg)) => Output {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
        Err(Failure::Negative(value, msg)) => Output {
            code: EXIT_NEGATIVE,
            stdout: render(&value),
            stderr: msg,
        },
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn limits() -> Limits {
    Limits::from_env()
}

fn load_basic(path: &Path) -> Result<PwlSystem, Failure> {
    Ok(PwlSystem::from_json_with_limits(&read(path)?, &limits())?)
}

fn load_extended(path: &Path) -> Result<ExtendedSystem, Failure> {
    Ok(ExtendedSystem::from_json_with_limits(&read(path)?, &limits())?)
}

fn load_multi(path: &Path) -> Result<MultiAgentSystem, Failure> {
    Ok(MultiAgentSystem::from_json(&read(path)?, &MaCaps::from_limits(&limits()))?)
}

fn load_plan(path: &Path, d: &dyn Dynamics) -> Result<PlanTable, Failure> {
    let initials = [d.initial_state()];
    let ctx = PlanContext {
        states: d.states(),
        actions: d.actions(),
        initials: &initials,
    };
    Ok(PlanTable::from_json(&read(path)?, &ctx)?)
}

fn load_cnf(path: &Path) -> Result<Cnf3, Failure> {
    Ok(Cnf3::from_dimacs(&read(path)?)?)
}

fn plan_json(plan: &PlanTable, d: &dyn Dynamics) -> Value {
    serde_json::to_value(plan.to_file(d.states(), d.actions())).expect("plan serializes")
}

/// Writes `body` to `out` when given and returns a short summary, otherwise
/// returns `body` itself.
fn emit(body: Value, out: Option<&Path>, summary: Value) -> Result<Value, Failure> {
    match out {
        Some(path) => {
            write(path, &render(&body))?;
            Ok(summary)
        }
        None => Ok(body),
    }
}

fn parse_json(text: &str) -> Result<Value, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("invalid JSON: {e}")))
}

fn dispatch(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Validate(a) => validate(&a.system),
        Command::Verify(a) => {
            let sys = load_basic(&a.system)?;
            let plan = load_plan(&a.plan, &sys)?;
            let h = a.horizon.unwrap_or(plan.horizon());
            let verdict = verify(&sys, &plan, h, a.threshold)?;
            verdict_result(verdict.to_json(&sys, false), verdict.satisfactory)
        }
        Command::ExtVerify(a) => {
            let es = load_extended(&a.system)?;
            let plan = load_plan(&a.plan, &es)?;
            let h = a.horizon.unwrap_or(plan.horizon());
            let verdict = ext_verify(&es, &plan, h, a.threshold)?;
            verdict_result(verdict.to_json(&es, true), verdict.satisfactory)
        }
        Command::Simulate(a) => simulate_cmd(a),
        Command::Shrink(a) => {
            let sys = load_basic(&a.system)?;
            let plan = load_plan(&a.plan, &sys)?;
            let short = shrink(&sys, &plan)?;
            let summary = json!({
                "horizon": short.horizon(),
                "entries": short.len(),
                "depth": pwl::decision_tree_view(&sys, &short).depth(),
                "input_depth": pwl::decision_tree_view(&sys, &plan).depth(),
            });
            Ok(Success::ok(emit(plan_json(&short, &sys), a.out.as_deref(), summary)?))
        }
        Command::Synthesize(a) => {
            let sys = load_basic(&a.system)?;
            let h = a.horizon.unwrap_or_else(|| default_horizon(&sys));
            let (plan, stats) = synthesize_with_stats(&sys, h);
            synth_result(plan, &sys, h, stats.explored, a.out.as_deref())
        }
        Command::ExtSynthesize(a) => {
            let es = load_extended(&a.system)?;
            let (plan, stats) = ext_synthesize_with_stats(&es, a.horizon);
            synth_result(plan, &es, a.horizon, stats.explored, a.out.as_deref())
        }
        Command::FromCnf(a) => {
            let phi = load_cnf(&a.cnf)?;
            let sys = system_from_cnf(&phi);
            let summary = json!({
                "variables": phi.num_vars(),
                "clauses": phi.num_clauses(),
                "states": sys.num_states(),
                "behaviors": sys.num_behaviors(),
                "horizon": phi.num_vars() + phi.num_clauses(),
            });
            Ok(Success::ok(emit(parse_json(&sys.to_json())?, a.out.as_deref(), summary)?))
        }
        Command::PlanFromAssignment(a) => {
            let phi = load_cnf(&a.cnf)?;
            let bits = parse_bits(&a.assignment, phi.num_vars())?;
            let s = Assignment::from_bits(&bits);
            match plan_from_assignment(&phi, &s) {
                Ok(plan) => {
                    let sys = system_from_cnf(&phi);
                    let summary = json!({"assignment": s.to_string(), "entries": plan.len(), "horizon": plan.horizon()});
                    Ok(Success::ok(emit(plan_json(&plan, &sys), a.out.as_deref(), summary)?))
                }
                Err(PwlError::RestrictionUnsatisfied { clause }) => Err(Failure::Negative(
                    json!({"assignment": s.to_string(), "satisfies": false, "violated_clause": clause}),
                    format!("assignment violates clause {clause}\n"),
                )),
                Err(e) => Err(e.into()),
            }
        }
        Command::AssignmentFromPlan(a) => {
            let phi = load_cnf(&a.cnf)?;
            let sys = system_from_cnf(&phi);
            let plan = load_plan(&a.plan, &sys)?;
            match assignment_from_plan(&phi, &plan) {
                Ok(s) => Ok(Success::ok(json!({
                    "assignment": s.to_string(),
                    "satisfies": phi.is_satisfied_by(&s),
                }))),
                Err(PwlError::NotSatisfactory(msg)) => Err(Failure::Negative(
                    json!({"satisfactory": false}),
                    format!("plan is not satisfactory: {msg}\n"),
                )),
                Err(e) => Err(e.into()),
            }
        }
        Command::Gen(a) => gen(a),
        Command::MaVerify(a) => {
            let ms = load_multi(&a.system)?;
            let mp = MultiAgentPlan::from_json(&read(&a.plan)?, &ms)?;
            let verdict = ma_verify(&ms, &mp, a.horizon)?;
            verdict_result(verdict.to_json(&ms), verdict.satisfactory)
        }
        Command::ReduceGoals(a) => {
            let ms = load_multi(&a.system)?;
            let reduced = reduce_goals(&ms, &MaCaps::from_limits(&limits()))?;
            let sizes: Vec<Value> = (0..2)
                .map(|i| json!({"states": reduced.agent(i).states.len(), "goals": reduced.agent(i).goals.len()}))
                .collect();
            let summary = json!({"agents": sizes, "behaviors": reduced.behaviors().len(), "actions": reduced.actions().len()});
            Ok(Success::ok(emit(parse_json(&reduced.to_json())?, a.out.as_deref(), summary)?))
        }
        Command::Bench(a) => {
            let mut config = match &a.spec {
                Some(path) => serde_json::from_str::<BenchConfig>(&read(path)?)
                    .map_err(|e| Failure::Usage(format!("invalid bench spec: {e}")))?,
                None => BenchConfig::default(),
            };
            if let Some(seed) = a.seed {
                config.seed = seed;
            }
            let report = verification_scaling(&config)?;
            Ok(Success::ok(report.to_json()))
        }
    }
}

fn verdict_result(v: Value, satisfactory: bool) -> CmdResult {
    if satisfactory {
        Ok(Success::ok(v))
    } else {
        Err(Failure::Negative(v, "plan is not satisfactory\n".into()))
    }
}

fn synth_result(plan: Option<PlanTable>, d: &dyn Dynamics, h: usize, explored: u64, out: Option<&Path>) -> CmdResult {
    let note = format!("explored {explored} nodes\n");
    match plan {
        Some(plan) => {
            let summary = json!({"exists": true, "horizon": h, "entries": plan.len()});
            let stdout = emit(plan_json(&plan, d), out, summary)?;
            Ok(Success {
                stdout,
                stderr: note,
                code: EXIT_OK,
            })
        }
        None => Err(Failure::Negative(json!({"exists": false, "horizon": h}), note)),
    }
}

fn parse_bits(text: &str, n: usize) -> Result<Vec<u8>, Failure> {
    let bits: Option<Vec<u8>> = text
        .chars()
        .map(|c| match c {
            '0' => Some(0),
            '1' => Some(1),
            _ => None,
        })
        .collect();
    match bits {
        Some(b) if b.len() == n => Ok(b),
        _ => Err(Failure::Usage(format!(
            "--assignment must be {n} digits of 0 or 1, got {text:?}"
        ))),
    }
}

fn validate(path: &Path) -> CmdResult {
    let text = read(path)?;
    let value = parse_json(&text)?;
    let out = if value.get("gamma_m").is_some() {
        let ms = MultiAgentSystem::from_json(&text, &MaCaps::from_limits(&limits()))?;
        let agents: Vec<Value> = ms
            .agents()
            .iter()
            .map(|a| json!({"states": a.states.len(), "initial": a.initials.len(), "goals": a.goals.len()}))
            .collect();
        json!({
            "kind": "multi-agent",
            "actions": ms.actions().len(),
            "behaviors": ms.behaviors().len(),
            "initial_behaviors": ms.initial_behaviors().len(),
            "agents": agents,
        })
    } else if value.get("gamma").is_some() {
        let es = ExtendedSystem::from_json_with_limits(&text, &limits())?;
        json!({
            "kind": "extended",
            "states": es.num_states(),
            "actions": es.num_actions(),
            "behaviors": es.behaviors().len(),
            "initial_candidates": es.candidates().len(),
        })
    } else {
        let sys = PwlSystem::from_json_with_limits(&text, &limits())?;
        json!({
            "kind": "basic",
            "states": sys.num_states(),
            "actions": sys.num_actions(),
            "behaviors": sys.num_behaviors(),
            "goal_states": sys.goal_states().count(),
            "default_horizon": default_horizon(&sys),
        })
    };
    Ok(Success::ok(out))
}

fn simulate_cmd(a: &SimulateArgs) -> CmdResult {
    let text = read(&a.system)?;
    let value = parse_json(&text)?;
    let unknown = || Failure::Usage(format!("unknown behavior {:?}", a.behavior));
    if value.get("gamma").is_some() {
        let es = ExtendedSystem::from_json_with_limits(&text, &limits())?;
        let plan = load_plan(&a.plan, &es)?;
        let b = es.behaviors().get(&a.behavior).ok_or_else(unknown)? as usize;
        let trace = ext_simulate(&es, &plan, b, a.horizon.unwrap_or(plan.horizon()))?;
        Ok(Success::ok(trace.to_json(&es, true)))
    } else {
        let sys = PwlSystem::from_json_with_limits(&text, &limits())?;
        let plan = load_plan(&a.plan, &sys)?;
        let b = sys.behavior(&a.behavior).ok_or_else(unknown)?;
        let trace = simulate(&sys, &plan, b, a.horizon.unwrap_or(plan.horizon()))?;
        Ok(Success::ok(trace.to_json(&sys, false)))
    }
}

fn gen(a: &GenArgs) -> CmdResult {
    let body = match &a.kind {
        GenKind::Intro => gen_intro_example().to_json(),
        GenKind::Transport { spec } => {
            let spec: TransportSpec = serde_json::from_str(&read(spec)?)
                .map_err(|e| Failure::Usage(format!("invalid transport spec: {e}")))?;
            gen_transport(&spec, limits().max_behaviors)?.to_json()
        }
        GenKind::Random {
            seed,
            states,
            actions,
            behaviors,
            goal_density,
        } => {
            if *states == 0 || *actions == 0 || *behaviors == 0 {
                return Err(Failure::Usage("--states, --actions and --behaviors must be positive".into()));
            }
            if !(0.0..=1.0).contains(goal_density) {
                return Err(Failure::Usage("--goal-density must be within [0, 1]".into()));
            }
            gen_random(*seed, *states, *actions, *behaviors, *goal_density).to_json()
        }
        GenKind::Cnf {
            seed,
            vars,
            clauses,
            unsat,
            dimacs_out,
        } => {
            let phi = if *unsat {
                all_sign_patterns_cnf()
            } else {
                Cnf3::random(*seed, *vars, *clauses)?
            };
            if let Some(path) = dimacs_out {
                write(path, &phi.to_dimacs())?;
            }
            system_from_cnf(&phi).to_json()
        }
        GenKind::Alarm => gen_alarm_example().to_json(),
        GenKind::Door => gen_door_example().to_json(),
        GenKind::Bridge => gen_narrow_bridge().to_json(),
        GenKind::Ma { name } => {
            let all = gen_ma_goal_instances();
            let names: Vec<&str> = all.iter().map(|i| i.name).collect();
            let inst = all
                .iter()
                .find(|i| i.name == name)
                .ok_or_else(|| Failure::Usage(format!("unknown instance {name:?}; known: {}", names.join(", "))))?;
            inst.system.to_json()
        }
    };
    let body = parse_json(&body)?;
    Ok(Success::ok(emit(body, a.out.as_deref(), json!({"written": true}))?))
}
