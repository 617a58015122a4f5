//! Flat `key=value` run configuration: file, then `--set` overrides, then
//! validation of everything at once.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use polarqdt::potential::{Channel, CollisionSystem, Symmetry};
use polarqdt::propagator::GridPolicy;
use polarqdt::scan::{FitParameter, FitSpec, ScanConfig};
use polarqdt::units;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Adiabats,
    Ploss,
    Rates,
    Fit,
    Resonances,
    Selfcheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Adiabats => "adiabats",
            Command::Ploss => "ploss",
            Command::Rates => "rates",
            Command::Fit => "fit",
            Command::Resonances => "resonances",
            Command::Selfcheck => "selfcheck",
        }
    }

    fn uses_short_range(self) -> bool {
        matches!(self, Command::Ploss | Command::Rates | Command::Fit | Command::Resonances)
    }
}

/// A known key, its default (`None` = required when relevant) and the
/// commands it applies to (empty = all).
struct Key {
    name: &'static str,
    default: Option<&'static str>,
    commands: &'static [Command],
}

use Command::*;

const SHORT_RANGE: &[Command] = &[Ploss, Rates, Fit, Resonances];
const DIPOLE_SCAN: &[Command] = &[Rates, Resonances];

const KEYS: &[Key] = &[
    Key { name: "c6_au", default: None, commands: &[] },
    Key { name: "symmetry", default: None, commands: &[] },
    Key { name: "l_max", default: Some("7"), commands: &[] },
    Key { name: "points_per_wavelength", default: Some("40"), commands: &[] },
    Key { name: "points_per_scale", default: Some("40"), commands: &[] },
    Key { name: "r_max_tail_tolerance", default: Some("1e-4"), commands: &[] },
    Key { name: "r_max_min_kr", default: Some("3"), commands: &[] },
    Key { name: "r_max_limit_bohr", default: Some("1e9"), commands: &[] },
    Key { name: "threads", default: Some("0"), commands: &[] },
    Key { name: "s", default: None, commands: SHORT_RANGE },
    Key { name: "y", default: None, commands: SHORT_RANGE },
    Key { name: "r_match_bohr", default: Some("20"), commands: SHORT_RANGE },
    Key { name: "dipole_debye", default: Some("0"), commands: &[Adiabats, Ploss] },
    Key { name: "adiabat_m", default: Some("0"), commands: &[Adiabats] },
    Key { name: "r_min_bohr", default: Some("20"), commands: &[Adiabats] },
    Key { name: "r_max_bohr", default: Some("5000"), commands: &[Adiabats] },
    Key { name: "r_points", default: Some("400"), commands: &[Adiabats] },
    Key { name: "ploss_l_max", default: Some("1"), commands: &[Ploss] },
    Key { name: "e_min_uK", default: Some("0.01"), commands: &[Ploss] },
    Key { name: "e_max_uK", default: Some("1000"), commands: &[Ploss] },
    Key { name: "e_points", default: Some("61"), commands: &[Ploss] },
    Key { name: "energy_uK", default: Some("0.25"), commands: &[Rates, Resonances, Fit] },
    Key { name: "d_min_debye", default: Some("0"), commands: DIPOLE_SCAN },
    Key { name: "d_max_debye", default: Some("0.6"), commands: DIPOLE_SCAN },
    Key { name: "d_points", default: Some("200"), commands: DIPOLE_SCAN },
    Key { name: "prominence", default: Some("1.5"), commands: &[Resonances] },
    Key { name: "dataset", default: None, commands: &[Fit] },
    Key { name: "fit_mask", default: Some("y"), commands: &[Fit] },
    Key { name: "s_min", default: Some("-5"), commands: &[Fit] },
    Key { name: "s_max", default: Some("5"), commands: &[Fit] },
    Key { name: "y_min", default: Some("0"), commands: &[Fit] },
    Key { name: "y_max", default: Some("1"), commands: &[Fit] },
    Key { name: "fit_max_iterations", default: Some("200"), commands: &[Fit] },
];

/// Keys outside the table: masses are one-of, the rate prefactor is optional.
const MASS_KEYS: [&str; 3] = ["reduced_mass_amu", "mass_amu_1", "mass_amu_2"];
const OPTIONAL_KEYS: [&str; 1] = ["statistical_factor"];
const COMMAND_KEY: &str = "command";

/// Unvalidated assignments in the order of precedence they were applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn split_assignment(line: &str) -> Result<(String, String), String> {
    let (key, value) = line.split_once('=').ok_or_else(|| format!("expected key=value, got `{line}`"))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() || key.contains(char::is_whitespace) {
        return Err(format!("invalid key in `{line}`"));
    }
    Ok((key.to_string(), value.to_string()))
}

impl RawConfig {
    /// Plain `key=value` lines; `#` starts a comment, blank lines are ignored.
    pub fn parse(text: &str, source: &str) -> Result<Self, Vec<String>> {
        let mut config = RawConfig::default();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match split_assignment(line) {
                Ok((k, v)) => {
                    config.entries.insert(k, v);
                }
                Err(e) => errors.push(format!("{source}:{}: {e}", i + 1)),
            }
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(errors)
        }
    }

    /// The resolved configuration embedded in the header of an output file.
    pub fn from_header(text: &str, source: &str) -> Result<Self, Vec<String>> {
        let mut config = RawConfig::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some(body) = line.strip_prefix("# ") {
                if let Ok((k, v)) = split_assignment(body) {
                    config.entries.insert(k, v);
                }
            }
        }
        if config.entries.is_empty() {
            return Err(vec![format!("{source}: no configuration header found")]);
        }
        Ok(config)
    }

    pub fn set(&mut self, assignment: &str) -> Result<(), String> {
        let (k, v) = split_assignment(assignment).map_err(|e| format!("--set: {e}"))?;
        self.entries.insert(k, v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Adiabats { m: i32, r_grid: (f64, f64, usize) },
    Ploss { l_max: u32, e_grid_uk: (f64, f64, usize) },
    Rates { energy: f64, d_grid_debye: (f64, f64, usize) },
    Resonances { energy: f64, d_grid_debye: (f64, f64, usize), prominence: f64 },
    Fit { energy: f64, dataset: String, spec: FitSpec },
    Selfcheck,
}

/// Validated run configuration, atomic units past this point.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub system: CollisionSystem,
    pub dipole: f64,
    pub s: f64,
    pub y: f64,
    pub r_match: f64,
    pub scan: ScanConfig,
    pub task: Task,
    /// Every relevant key with its value, defaults filled in.
    pub resolved: BTreeMap<String, String>,
}

struct Reader<'a> {
    values: &'a BTreeMap<String, String>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn text(&mut self, key: &str) -> Option<&'a str> {
        let value = self.values.get(key).map(String::as_str);
        if value.is_none() {
            self.errors.push(format!("missing required key `{key}`"));
        }
        value
    }

    fn f64_where(&mut self, key: &str, ok: impl Fn(f64) -> bool, what: &str) -> f64 {
        let Some(text) = self.text(key) else {
            return f64::NAN;
        };
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && ok(v) => v,
            Ok(v) => {
                self.errors.push(format!("`{key}` = {v} must be {what}"));
                f64::NAN
            }
            Err(_) => {
                self.errors.push(format!("`{key}` = `{text}` is not a number"));
                f64::NAN
            }
        }
    }

    fn positive(&mut self, key: &str) -> f64 {
        self.f64_where(key, |v| v > 0.0, "positive")
    }

    fn non_negative(&mut self, key: &str) -> f64 {
        self.f64_where(key, |v| v >= 0.0, "non-negative")
    }

    fn real(&mut self, key: &str) -> f64 {
        self.f64_where(key, |_| true, "finite")
    }

    fn integer(&mut self, key: &str, min: i64, max: i64) -> i64 {
        let Some(text) = self.text(key) else {
            return min;
        };
        match text.parse::<i64>() {
            Ok(v) if (min..=max).contains(&v) => v,
            _ => {
                self.errors.push(format!("`{key}` = `{text}` must be an integer in [{min}, {max}]"));
                min
            }
        }
    }

    fn grid(&mut self, lo: &str, hi: &str, n: &str, strictly_positive: bool) -> (f64, f64, usize) {
        let a = if strictly_positive { self.positive(lo) } else { self.non_negative(lo) };
        let b = self.positive(hi);
        let count = self.integer(n, 2, 100_000) as usize;
        if a.is_finite() && b.is_finite() && b <= a {
            self.errors.push(format!("`{hi}` must exceed `{lo}`"));
        }
        (a, b, count)
    }
}

fn applies(key: &Key, command: Command) -> bool {
    key.commands.is_empty() || key.commands.contains(&command)
}

/// Resolves defaults and checks every precondition; all problems are
/// reported together.
pub fn resolve(raw: &RawConfig, command: Command) -> Result<RunConfig, Vec<String>> {
    let mut errors = Vec::new();
    let mut values = BTreeMap::new();

    for (key, value) in &raw.entries {
        if key == COMMAND_KEY {
            if value != command.name() {
                errors.push(format!("configuration was written by `{value}`, not `{}`", command.name()));
            }
            continue;
        }
        match KEYS.iter().find(|k| k.name == key) {
            Some(spec) if applies(spec, command) => {
                values.insert(key.clone(), value.clone());
            }
            Some(_) => log::info!("key `{key}` is not used by `{}`", command.name()),
            None if MASS_KEYS.contains(&key.as_str()) || OPTIONAL_KEYS.contains(&key.as_str()) => {
                values.insert(key.clone(), value.clone());
            }
            None => errors.push(format!("unknown key `{key}`")),
        }
    }
    for key in KEYS.iter().filter(|k| applies(k, command)) {
        if let (Some(default), false) = (key.default, values.contains_key(key.name)) {
            values.insert(key.name.to_string(), default.to_string());
        }
    }

    let mut r = Reader { values: &values, errors: Vec::new() };
    let c6 = r.positive("c6_au");
    let mu_amu = match (
        values.contains_key("reduced_mass_amu"),
        values.contains_key("mass_amu_1") || values.contains_key("mass_amu_2"),
    ) {
        (true, false) => r.positive("reduced_mass_amu"),
        (false, true) => {
            let (m1, m2) = (r.positive("mass_amu_1"), r.positive("mass_amu_2"));
            m1 * m2 / (m1 + m2)
        }
        (true, true) => {
            r.errors.push("give either `reduced_mass_amu` or `mass_amu_1` and `mass_amu_2`, not both".into());
            f64::NAN
        }
        (false, false) => {
            r.errors.push("missing required key `reduced_mass_amu` (or `mass_amu_1` and `mass_amu_2`)".into());
            f64::NAN
        }
    };
    let symmetry = match r.text("symmetry") {
        Some("fermions") => Some(Symmetry::IdenticalFermions),
        Some("bosons") => Some(Symmetry::IdenticalBosons),
        Some("distinguishable") => Some(Symmetry::Distinguishable),
        Some(other) => {
            r.errors.push(format!("`symmetry` = `{other}` must be fermions, bosons or distinguishable"));
            None
        }
        None => None,
    };
    let g = values.contains_key("statistical_factor").then(|| r.positive("statistical_factor"));

    let l_max = r.integer("l_max", 1, 40) as u32;
    let policy = GridPolicy {
        points_per_wavelength: r.positive("points_per_wavelength"),
        points_per_scale: r.positive("points_per_scale"),
        tail_tolerance: r.positive("r_max_tail_tolerance"),
        min_kr: r.positive("r_max_min_kr"),
        r_max_limit: r.positive("r_max_limit_bohr"),
        ..GridPolicy::default()
    };
    if policy.points_per_wavelength.is_finite()
        && policy.points_per_scale.is_finite()
        && policy.tail_tolerance.is_finite()
        && policy.min_kr.is_finite()
        && policy.r_max_limit.is_finite()
    {
        if let Err(e) = policy.validate() {
            r.errors.push(e.to_string());
        }
    }
    let threads = r.integer("threads", 0, 1024) as usize;

    let (mut s, mut y, mut r_match) = (f64::NAN, f64::NAN, polarqdt::propagator::DEFAULT_R_MATCH);
    if command.uses_short_range() {
        s = r.real("s");
        y = r.f64_where("y", |v| (0.0..=1.0).contains(&v), "in [0, 1]");
        r_match = r.positive("r_match_bohr");
    }
    let dipole =
        if values.contains_key("dipole_debye") { units::debye_to_au(r.non_negative("dipole_debye")) } else { 0.0 };
    let energy = |r: &mut Reader| units::microkelvin_to_hartree(r.positive("energy_uK"));

    let task = match command {
        Adiabats => {
            let m = r.integer("adiabat_m", 0, l_max as i64) as i32;
            Task::Adiabats { m, r_grid: r.grid("r_min_bohr", "r_max_bohr", "r_points", true) }
        }
        Ploss => Task::Ploss {
            l_max: r.integer("ploss_l_max", 0, l_max as i64) as u32,
            e_grid_uk: r.grid("e_min_uK", "e_max_uK", "e_points", true),
        },
        Rates => Task::Rates {
            energy: energy(&mut r),
            d_grid_debye: r.grid("d_min_debye", "d_max_debye", "d_points", false),
        },
        Resonances => Task::Resonances {
            energy: energy(&mut r),
            d_grid_debye: r.grid("d_min_debye", "d_max_debye", "d_points", false),
            prominence: r.f64_where("prominence", |v| v > 1.0, "above 1"),
        },
        Fit => {
            let energy = energy(&mut r);
            let dataset = r.text("dataset").unwrap_or_default().to_string();
            let mask = r.text("fit_mask").unwrap_or("y").to_string();
            let (free_s, free_y) = match mask.as_str() {
                "y" => (false, true),
                "s" => (true, false),
                "s,y" | "y,s" => (true, true),
                other => {
                    r.errors.push(format!("`fit_mask` = `{other}` must be y, s or s,y"));
                    (false, true)
                }
            };
            let bounds = |r: &mut Reader, lo: &str, hi: &str, initial: f64, free: bool| {
                let (a, b) = (r.real(lo), r.real(hi));
                if free && a.is_finite() && b.is_finite() && !(a <= initial && initial <= b && a < b) {
                    r.errors.push(format!("initial value {initial} must lie inside [`{lo}`, `{hi}`] = [{a}, {b}]"));
                }
                if free {
                    FitParameter::free(initial, a, b)
                } else {
                    FitParameter::fixed(initial)
                }
            };
            let s_par = bounds(&mut r, "s_min", "s_max", s, free_s);
            let y_par = bounds(&mut r, "y_min", "y_max", y, free_y);
            if free_y && !(y_par.lower >= 0.0 && y_par.upper <= 1.0) {
                r.errors.push("`y_min` and `y_max` must lie in [0, 1]".into());
            }
            let max_iterations = r.integer("fit_max_iterations", 1, 100_000) as u64;
            Task::Fit { energy, dataset, spec: FitSpec { s: s_par, y: y_par, r_match, max_iterations } }
        }
        Selfcheck => Task::Selfcheck,
    };
    errors.append(&mut r.errors);

    let system = match (symmetry, errors.is_empty()) {
        (Some(symmetry), true) => {
            let base = CollisionSystem::new(units::amu_to_au(mu_amu), c6, 0.0, symmetry);
            match (base, g) {
                (Ok(sys), Some(g)) => sys.with_statistical_factor(g).map_err(|e| e.to_string()),
                (Ok(sys), None) => Ok(sys),
                (Err(e), _) => Err(e.to_string()),
            }
        }
        _ => Err(String::new()),
    };
    if let (Err(e), true) = (&system, errors.is_empty()) {
        errors.push(e.clone());
    }
    if command.uses_short_range() && errors.is_empty() {
        if let Ok(sys) = &system {
            let check = polarqdt::qdt::ShortRangeParams::new(s, y, r_match).and_then(|p| p.check_against(sys));
            if let Err(e) = check {
                errors.push(e.to_string());
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    values.insert(COMMAND_KEY.to_string(), command.name().to_string());
    Ok(RunConfig {
        command,
        system: system.expect("checked above"),
        dipole,
        s,
        y,
        r_match,
        scan: ScanConfig { l_max, policy, threads },
        task,
        resolved: values,
    })
}

impl RunConfig {
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Reproducibility header: version, config hash and the resolved
    /// configuration, each line a comment.
    pub fn header(&self) -> String {
        let mut out = format!("# polarqdt {}\n# config_sha256 {}\n", env!("CARGO_PKG_VERSION"), self.hash());
        for (k, v) in &self.resolved {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

/// Channels (L, M ≥ 0) with L ≤ `l_max` allowed by the exchange symmetry.
pub fn channels_up_to(symmetry: Symmetry, l_max: u32) -> Vec<Channel> {
    (0..=l_max)
        .filter(|&l| symmetry.parity().admits(l))
        .flat_map(|l| (0..=l as i32).map(move |m| Channel { l, m }))
        .collect()
}
