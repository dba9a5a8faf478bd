//! Simulation configuration: a flat `key = value` text format with `#`
//! comments and dotted keys, plus the bundled experiment presets.
//!
//! The full key list with defaults is documented in `presets/SCHEMA.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::discretization::SeedOptions;
use crate::domain::HalfSpace;
use crate::maxent::LmeParams;
use crate::solver::advection::NamedFlow;
use crate::{AdvectionField, Domain, OtmError, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Container.
    pub domain: Domain,
    /// Support of the uniform initial density.
    pub region: Domain,
    pub rho0: f64,
    pub kappa: f64,
    pub advection: AdvectionField,
    /// Target nodal spacing of the seeding.
    pub spacing: f64,
    pub surface_factor: f64,
    pub interior_factor: f64,
    pub lme: LmeParams,
    /// Fraction of `Δx²/κ` used as the time step.
    pub safety: f64,
    pub dt_cap: Option<f64>,
    pub end_time: f64,
    pub max_steps: Option<usize>,
    /// History rows and snapshots are emitted every `cadence` steps.
    pub cadence: usize,
    pub snapshots: bool,
    pub rebuild_tol: f64,
    pub lumped: bool,
    pub output_dir: PathBuf,
    /// Salt of the deterministic seeding jitter (no random numbers are drawn).
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(OtmError::ConfigValue {
                key: key.into(),
                message,
            })
        };
        self.domain.validate().or_else(|e| bad("domain", e.to_string()))?;
        self.region.validate().or_else(|e| bad("region", e.to_string()))?;
        self.advection.validate().or_else(|e| bad("advection", e.to_string()))?;
        self.lme.validate()?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa", format!("must be nonnegative, got {}", self.kappa));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0", format!("must be positive, got {}", self.rho0));
        }
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return bad("time.end", format!("must be positive, got {}", self.end_time));
        }
        if !(self.spacing > 0.0) {
            return bad("seeding.spacing", format!("must be positive, got {}", self.spacing));
        }
        if !(self.surface_factor > 0.0) {
            return bad("seeding.surface_factor", "must be positive".into());
        }
        if !(self.interior_factor > 0.0) {
            return bad("seeding.interior_factor", "must be positive".into());
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad("time.safety", format!("must lie in (0, 1), got {}", self.safety));
        }
        if let Some(cap) = self.dt_cap {
            if !(cap > 0.0) {
                return bad("time.dt_cap", format!("must be positive, got {cap}"));
            }
        }
        if self.kappa == 0.0 && self.dt_cap.is_none() {
            return bad("time.dt_cap", "required when kappa = 0 (no diffusive step limit)".into());
        }
        if self.cadence == 0 {
            return bad("output.cadence", "must be at least 1".into());
        }
        if !(self.rebuild_tol > 0.0) {
            return bad("neighbors.rebuild_tol", "must be positive".into());
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Result<SimConfig> {
        let text = preset_text(name).ok_or_else(|| OtmError::ConfigValue {
            key: "preset".into(),
            message: format!("unknown preset `{name}` (known: {})", PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")),
        })?;
        parse_config(text)
    }

    /// Renders the configuration in the text format accepted by [`parse_config`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_domain(&mut s, "domain", &self.domain);
        write_domain(&mut s, "region", &self.region);
        kv(&mut s, "rho0", num(self.rho0));
        kv(&mut s, "kappa", num(self.kappa));
        match &self.advection {
            AdvectionField::Zero => kv(&mut s, "advection.kind", "none".into()),
            AdvectionField::RigidRotation { point, axis, omega } => {
                kv(&mut s, "advection.kind", "rigid_rotation".into());
                kv(&mut s, "advection.point", vec3(point));
                kv(&mut s, "advection.axis", vec3(axis));
                kv(&mut s, "advection.omega", num(*omega));
            }
            AdvectionField::Named(f) => {
                kv(&mut s, "advection.kind", f.name().into());
                match f {
                    NamedFlow::Uniform { velocity } => kv(&mut s, "advection.velocity", vec3(velocity)),
                    NamedFlow::Expansion { center, rate } => {
                        kv(&mut s, "advection.center", vec3(center));
                        kv(&mut s, "advection.rate", num(*rate));
                    }
                    NamedFlow::Shear { rate } => kv(&mut s, "advection.rate", num(*rate)),
                }
            }
        }
        kv(&mut s, "seeding.spacing", num(self.spacing));
        kv(&mut s, "seeding.surface_factor", num(self.surface_factor));
        kv(&mut s, "seeding.interior_factor", num(self.interior_factor));
        kv(&mut s, "seed", self.seed.to_string());
        kv(&mut s, "lme.gamma", num(self.lme.gamma));
        kv(&mut s, "lme.eps_cut", num(self.lme.eps_cut));
        kv(&mut s, "lme.newton_tol", num(self.lme.newton_tol));
        kv(&mut s, "lme.max_newton_iters", self.lme.max_newton_iters.to_string());
        kv(&mut s, "time.end", num(self.end_time));
        kv(&mut s, "time.safety", num(self.safety));
        if let Some(cap) = self.dt_cap {
            kv(&mut s, "time.dt_cap", num(cap));
        }
        if let Some(n) = self.max_steps {
            kv(&mut s, "time.max_steps", n.to_string());
        }
        kv(&mut s, "output.cadence", self.cadence.to_string());
        kv(&mut s, "output.snapshots", self.snapshots.to_string());
        kv(&mut s, "output.dir", self.output_dir.display().to_string());
        kv(&mut s, "neighbors.rebuild_tol", num(self.rebuild_tol));
        kv(&mut s, "mass.lumped", self.lumped.to_string());
        s
    }
}

fn kv(s: &mut String, k: &str, v: String) {
    let _ = writeln!(s, "{k} = {v}");
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn vec3(p: &Point) -> String {
    format!("{:?} {:?} {:?}", p.x, p.y, p.z)
}

fn write_domain(s: &mut String, prefix: &str, d: &Domain) {
    let k = |name: &str| format!("{prefix}.{name}");
    match d {
        Domain::Sphere { center, radius } => {
            kv(s, &k("kind"), "sphere".into());
            kv(s, &k("center"), vec3(center));
            kv(s, &k("radius"), num(*radius));
        }
        Domain::Cylinder {
            center,
            axis,
            radius,
            half_length,
        } => {
            kv(s, &k("kind"), "cylinder".into());
            kv(s, &k("center"), vec3(center));
            kv(s, &k("axis"), vec3(axis));
            kv(s, &k("radius"), num(*radius));
            kv(s, &k("length"), num(2.0 * half_length));
        }
        Domain::Annulus {
            center,
            axis,
            outer_radius,
            inner_radius,
            half_height,
        } => {
            kv(s, &k("kind"), "annulus".into());
            kv(s, &k("center"), vec3(center));
            kv(s, &k("axis"), vec3(axis));
            kv(s, &k("outer_radius"), num(*outer_radius));
            kv(s, &k("inner_radius"), num(*inner_radius));
            kv(s, &k("height"), num(2.0 * half_height));
        }
        Domain::Polyhedron { planes } => {
            kv(s, &k("kind"), "polyhedron".into());
            let list: Vec<String> = planes
                .iter()
                .map(|h| format!("{} {}", vec3(&h.normal), num(h.offset)))
                .collect();
            kv(s, &k("planes"), list.join("; "));
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        let (line, v) = self.map.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some((*line, v.as_str()))
    }

    fn value_err(key: &str, message: impl Into<String>) -> OtmError {
        OtmError::ConfigValue {
            key: key.into(),
            message: message.into(),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, "")) => Err(Self::value_err(key, "missing value")),
            Some((_, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Self::value_err(key, format!("cannot parse `{v}`"))),
        }
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Self::value_err(key, "required key is missing"))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn vec3(&self, key: &str) -> Result<Option<Point>> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, v)) => parse_vec3(v).map(Some).ok_or_else(|| Self::value_err(key, format!("expected three numbers, got `{v}`"))),
        }
    }

    fn vec3_or(&self, key: &str, default: Point) -> Result<Point> {
        Ok(self.vec3(key)?.unwrap_or(default))
    }

    fn vec3_req(&self, key: &str) -> Result<Point> {
        self.vec3(key)?.ok_or_else(|| Self::value_err(key, "required key is missing"))
    }
}

fn parse_vec3(v: &str) -> Option<Point> {
    let parts: Vec<f64> = v
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    (parts.len() == 3).then(|| Point::new(parts[0], parts[1], parts[2]))
}

fn parse_domain(e: &Entries, prefix: &str) -> Result<Domain> {
    let k = |name: &str| format!("{prefix}.{name}");
    let kind: String = e.req(&k("kind"))?;
    let wrap = |r: Result<Domain>| r.map_err(|err| Entries::value_err(prefix, err.to_string()));
    match kind.as_str() {
        "sphere" => wrap(Domain::sphere(e.vec3_or(&k("center"), Point::zeros())?, e.req(&k("radius"))?)),
        "cylinder" => wrap(Domain::cylinder(
            e.vec3_or(&k("center"), Point::zeros())?,
            e.vec3_or(&k("axis"), Point::z())?,
            e.req(&k("radius"))?,
            e.req(&k("length"))?,
        )),
        "annulus" => {
            let outer: f64 = e.req(&k("outer_radius"))?;
            let inner: f64 = e.req(&k("inner_radius"))?;
            let height = e.or(&k("height"), outer - inner)?;
            wrap(Domain::annulus(
                e.vec3_or(&k("center"), Point::zeros())?,
                e.vec3_or(&k("axis"), Point::z())?,
                outer,
                inner,
                height,
            ))
        }
        "box" => wrap(Domain::aabb(e.vec3_req(&k("lo"))?, e.vec3_req(&k("hi"))?)),
        "polyhedron" => {
            let key = k("planes");
            let (_, text) = e.raw(&key).ok_or_else(|| Entries::value_err(&key, "required key is missing"))?;
            let mut planes = Vec::new();
            for item in text.split(';').map(str::trim).filter(|t| !t.is_empty()) {
                let nums: Vec<f64> = item
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Entries::value_err(&key, format!("cannot parse plane `{item}`")))?;
                if nums.len() != 4 {
                    return Err(Entries::value_err(&key, format!("plane `{item}` needs nx ny nz offset")));
                }
                planes.push(HalfSpace {
                    normal: Point::new(nums[0], nums[1], nums[2]),
                    offset: nums[3],
                });
            }
            wrap(Domain::polyhedron(planes))
        }
        other => Err(Entries::value_err(&k("kind"), format!("unknown domain kind `{other}`"))),
    }
}

fn parse_advection(e: &Entries) -> Result<AdvectionField> {
    let kind: String = e.or("advection.kind", "none".to_string())?;
    let field = match kind.as_str() {
        "none" | "zero" => AdvectionField::Zero,
        "rigid_rotation" => AdvectionField::rigid_rotation(
            e.vec3_or("advection.point", Point::zeros())?,
            e.vec3_or("advection.axis", Point::z())?,
            e.req("advection.omega")?,
        )
        .map_err(|err| Entries::value_err("advection.axis", err.to_string()))?,
        "uniform" => AdvectionField::Named(NamedFlow::Uniform {
            velocity: e.vec3_req("advection.velocity")?,
        }),
        "expansion" => AdvectionField::Named(NamedFlow::Expansion {
            center: e.vec3_or("advection.center", Point::zeros())?,
            rate: e.req("advection.rate")?,
        }),
        "shear" => AdvectionField::Named(NamedFlow::Shear {
            rate: e.req("advection.rate")?,
        }),
        other => return Err(Entries::value_err("advection.kind", format!("unknown field `{other}`"))),
    };
    Ok(field)
}

/// Parses the `key = value` configuration format.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(OtmError::ConfigSyntax {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = k.trim();
        let valid = !key.is_empty()
            && key
                .split('.')
                .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        if !valid {
            return Err(OtmError::ConfigSyntax {
                line: line_no,
                message: format!("malformed key `{key}`"),
            });
        }
        if map.insert(key.to_string(), (line_no, v.trim().to_string())).is_some() {
            return Err(OtmError::ConfigSyntax {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    let e = Entries {
        map,
        used: Default::default(),
    };
    let defaults = LmeParams::default();
    let seed_defaults = SeedOptions::default();
    let config = SimConfig {
        domain: parse_domain(&e, "domain")?,
        region: parse_domain(&e, "region")?,
        rho0: e.or("rho0", 1.0)?,
        kappa: e.req("kappa")?,
        advection: parse_advection(&e)?,
        spacing: e.req("seeding.spacing")?,
        surface_factor: e.or("seeding.surface_factor", seed_defaults.surface_factor)?,
        interior_factor: e.or("seeding.interior_factor", seed_defaults.interior_factor)?,
        seed: e.or("seed", 0)?,
        lme: LmeParams {
            gamma: e.or("lme.gamma", defaults.gamma)?,
            eps_cut: e.or("lme.eps_cut", defaults.eps_cut)?,
            newton_tol: e.or("lme.newton_tol", defaults.newton_tol)?,
            max_newton_iters: e.or("lme.max_newton_iters", defaults.max_newton_iters)?,
        },
        end_time: e.req("time.end")?,
        safety: e.or("time.safety", 0.1)?,
        dt_cap: e.get("time.dt_cap")?,
        max_steps: e.get("time.max_steps")?,
        cadence: e.or("output.cadence", 1)?,
        snapshots: e.or("output.snapshots", true)?,
        output_dir: PathBuf::from(e.or("output.dir", "out".to_string())?),
        rebuild_tol: e.or("neighbors.rebuild_tol", 0.1)?,
        lumped: e.or("mass.lumped", true)?,
    };
    let used = e.used.borrow();
    if let Some((key, (line, _))) = e.map.iter().find(|(k, _)| !used.contains(*k)) {
        return Err(OtmError::ConfigSyntax {
            line: *line,
            message: format!("unknown key `{key}`"),
        });
    }
    config.validate()?;
    Ok(config)
}

/// Bundled presets: `(name, config text)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("sphere_coarse", include_str!("../../../presets/sphere_coarse.cfg")),
    ("sphere_medium", include_str!("../../../presets/sphere_medium.cfg")),
    ("sphere_fine", include_str!("../../../presets/sphere_fine.cfg")),
    ("sphere_desk", include_str!("../../../presets/sphere_desk.cfg")),
    ("sphere_desk_medium", include_str!("../../../presets/sphere_desk_medium.cfg")),
    ("annulus_advection", include_str!("../../../presets/annulus_advection.cfg")),
    ("annulus_advdiff", include_str!("../../../presets/annulus_advdiff.cfg")),
    ("annulus_advdiff_desk", include_str!("../../../presets/annulus_advdiff_desk.cfg")),
    ("annulus_underresolved", include_str!("../../../presets/annulus_underresolved.cfg")),
    ("bucket", include_str!("../../../presets/bucket.cfg")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        domain.kind = sphere
        domain.radius = 7
        region.kind = sphere
        region.radius = 1
        kappa = 0.05
        seeding.spacing = 0.3
        time.end = 1
    ";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.rho0, 1.0);
        assert_eq!(c.safety, 0.1);
        assert_eq!(c.lme, LmeParams::default());
        assert!(c.lumped);
        assert_eq!(c.advection, AdvectionField::Zero);
    }

    #[test]
    fn sphere_coarse_preset() {
        let c = SimConfig::preset("sphere_coarse").unwrap();
        assert_eq!(c.region, Domain::sphere(Point::zeros(), 1.0).unwrap());
        assert_eq!(c.domain, Domain::sphere(Point::zeros(), 7.0).unwrap());
        assert_eq!(c.rho0, 1.0);
    }

    #[test]
    fn annulus_advdiff_preset() {
        let c = SimConfig::preset("annulus_advdiff").unwrap();
        assert_eq!(c.kappa, 0.001);
        match c.advection {
            AdvectionField::RigidRotation { omega, .. } => assert_eq!(omega, 4.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(c.domain, Domain::Annulus { outer_radius, inner_radius, .. } if outer_radius == 0.5 && inner_radius == 0.25));
    }

    #[test]
    fn empty_kappa_names_the_key() {
        let text = MINIMAL.replace("kappa = 0.05", "kappa =");
        match parse_config(&text) {
            Err(OtmError::ConfigValue { key, .. }) => assert_eq!(key, "kappa"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("kappa = 0.05", "");
        assert!(matches!(parse_config(&text), Err(OtmError::ConfigValue { key, .. }) if key == "kappa"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = format!("{MINIMAL}\nthis line is wrong\n");
        match parse_config(&text) {
            Err(OtmError::ConfigSyntax { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\nbogus.key = 3\n");
        assert!(matches!(parse_config(&text), Err(OtmError::ConfigSyntax { line: 10, .. })));
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let text = MINIMAL.replace("kappa = 0.05", "kappa = -1");
        assert!(matches!(parse_config(&text), Err(OtmError::ConfigValue { key, .. }) if key == "kappa"));
        let text = format!("{MINIMAL}output.cadence = 0\n");
        assert!(matches!(parse_config(&text), Err(OtmError::ConfigValue { key, .. }) if key == "output.cadence"));
        let text = MINIMAL.replace("region.radius = 1", "region.radius = 0");
        assert!(matches!(parse_config(&text), Err(OtmError::ConfigValue { key, .. }) if key == "region"));
    }

    #[test]
    fn presets_round_trip() {
        for (name, _) in PRESETS {
            let c = SimConfig::preset(name).unwrap();
            let again = parse_config(&c.to_text()).unwrap();
            assert_eq!(c, again, "{name}");
        }
    }

    #[test]
    fn polyhedron_round_trip() {
        let text = MINIMAL.replace(
            "region.kind = sphere\n        region.radius = 1",
            "region.kind = box\n        region.lo = -1 -1 -1\n        region.hi = 1 1 2",
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }
}
