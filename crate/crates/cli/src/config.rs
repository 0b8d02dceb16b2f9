//! Plain `key = value` run configurations.
//!
//! One key per line, `#` comments, blank lines ignored. Parsing validates
//! everything and reports the complete list of violations, each tagged with
//! its line number; duplicate keys name both offending lines.

use std::collections::BTreeMap;
use std::path::PathBuf;

use singlab::mesh::{build_domain, DomainKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Hardy,
    Elliptic,
    Wave,
    Schrodinger,
    Hum,
    Semilinear,
    Study,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Hardy => "hardy",
            Task::Elliptic => "elliptic",
            Task::Wave => "wave",
            Task::Schrodinger => "schrodinger",
            Task::Hum => "hum",
            Task::Semilinear => "semilinear",
            Task::Study => "study",
        }
    }

    fn parse(s: &str) -> Option<Task> {
        Some(match s {
            "hardy" => Task::Hardy,
            "elliptic" => Task::Elliptic,
            "wave" => Task::Wave,
            "schrodinger" => Task::Schrodinger,
            "hum" => Task::Hum,
            "semilinear" => Task::Semilinear,
            "study" => Task::Study,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    /// Hardy quotient μ(Ω)
    Mu,
    /// improved Hardy log-remainder
    Improved,
    Tu8,
    Tuu8,
    Pohozaev,
    Trace,
    Continuation,
}

impl Check {
    fn parse(s: &str) -> Option<Check> {
        Some(match s {
            "mu" => Check::Mu,
            "improved" => Check::Improved,
            "tu8" => Check::Tu8,
            "tuu8" => Check::Tuu8,
            "pohozaev" => Check::Pohozaev,
            "trace" => Check::Trace,
            "continuation" => Check::Continuation,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Check::Mu => "mu",
            Check::Improved => "improved",
            Check::Tu8 => "tu8",
            Check::Tuu8 => "tuu8",
            Check::Pohozaev => "pohozaev",
            Check::Trace => "trace",
            Check::Continuation => "continuation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HumMode {
    Control,
    Scan,
    /// Gramian algebra battery: symmetry, positivity, duality cross-check
    /// and control-map linearity
    Gramian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    Wave,
    Schrodinger,
}

/// Initial-data / load selectors for the evolution and control tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataChoice {
    /// fixed smooth deterministic fields
    Smooth,
    /// first mode of (K − λW, M)
    Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadChoice {
    One,
    Xn,
    Bump,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: Task,
    pub domain: DomainKind,
    pub h: Option<f64>,
    pub h_list: Vec<f64>,
    /// nested refinement levels counting the base mesh (1 = no refinement)
    pub levels: usize,
    pub quad_order: usize,
    pub delta: f64,
    pub grading: f64,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub check: Option<Check>,
    pub eps: Option<f64>,
    pub eps_list: Vec<f64>,
    pub alpha: Option<f64>,
    pub rho: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub mode: HumMode,
    pub equation: Equation,
    pub t_list: Vec<f64>,
    pub samples: usize,
    pub allow_short_time: bool,
    pub data: DataChoice,
    pub load: LoadChoice,
    pub study_task: Option<Task>,
    pub out_dir: PathBuf,
    /// raw config text (hashed into every artifact's provenance line)
    pub raw_text: String,
}

const KNOWN_KEYS: &[&str] = &[
    "task",
    "domain",
    "length",
    "radius",
    "h",
    "h_list",
    "levels",
    "quad_order",
    "delta",
    "grading",
    "lambda",
    "seed",
    "dt",
    "T",
    "check",
    "eps",
    "eps_list",
    "alpha",
    "rho",
    "cg_tol",
    "cg_max_iter",
    "mode",
    "equation",
    "T_list",
    "samples",
    "allow_short_time",
    "data",
    "load",
    "study_task",
    "out_dir",
];

struct Raw<'a> {
    value: &'a str,
    line: usize,
}

/// Parse and validate; returns every violation, not just the first.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<String>> {
    let mut errors: Vec<String> = Vec::new();
    let mut map: BTreeMap<&str, Raw> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let stripped = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some(eq) = stripped.find('=') else {
            errors.push(format!("line {lineno}: expected `key = value`, got `{stripped}`"));
            continue;
        };
        let key = stripped[..eq].trim();
        let value = stripped[eq + 1..].trim();
        if key.is_empty() || value.is_empty() {
            errors.push(format!("line {lineno}: empty key or value"));
            continue;
        }
        if !KNOWN_KEYS.contains(&key) {
            errors.push(format!("line {lineno}: unknown key `{key}`"));
            continue;
        }
        if let Some(prev) = map.get(key) {
            errors.push(format!(
                "line {lineno}: duplicate key `{key}` (first set on line {})",
                prev.line
            ));
            continue;
        }
        // borrow the key slice from KNOWN_KEYS so the map key outlives `line`
        let key_static = KNOWN_KEYS.iter().find(|&&k| k == key).unwrap();
        map.insert(key_static, Raw { value, line: lineno });
    }

    let get_f64 = |key: &str, errors: &mut Vec<String>| -> Option<(f64, usize)> {
        map.get(key).and_then(|raw| match raw.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some((v, raw.line)),
            _ => {
                errors.push(format!("line {}: `{key}` is not a finite number", raw.line));
                None
            }
        })
    };

    let task = match map.get("task") {
        Some(raw) => match Task::parse(raw.value) {
            Some(t) => Some(t),
            None => {
                errors.push(format!("line {}: unknown task `{}`", raw.line, raw.value));
                None
            }
        },
        None => {
            errors.push("missing required key `task`".to_string());
            None
        }
    };

    // domain + shape parameter
    let domain = match map.get("domain") {
        Some(raw) => {
            let kind = match raw.value {
                "interval" => {
                    let length = get_f64("length", &mut errors).map(|(v, _)| v);
                    match length {
                        Some(l) => Some(DomainKind::Interval { length: l }),
                        None => {
                            if !map.contains_key("length") {
                                errors.push(format!(
                                    "line {}: domain `interval` requires key `length`",
                                    raw.line
                                ));
                            }
                            None
                        }
                    }
                }
                "tangent_disk" | "half_disk" => {
                    let radius = get_f64("radius", &mut errors).map(|(v, _)| v);
                    match radius {
                        Some(r) if raw.value == "tangent_disk" => {
                            Some(DomainKind::TangentDisk { radius: r })
                        }
                        Some(r) => Some(DomainKind::HalfDisk { radius: r }),
                        None => {
                            if !map.contains_key("radius") {
                                errors.push(format!(
                                    "line {}: domain `{}` requires key `radius`",
                                    raw.line, raw.value
                                ));
                            }
                            None
                        }
                    }
                }
                other => {
                    errors.push(format!("line {}: unknown domain `{other}`", raw.line));
                    None
                }
            };
            match kind.map(build_domain) {
                Some(Ok(spec)) => Some(spec),
                Some(Err(e)) => {
                    errors.push(format!("line {}: {e}", raw.line));
                    None
                }
                None => None,
            }
        }
        None => {
            errors.push("missing required key `domain`".to_string());
            None
        }
    };

    let parse_list = |key: &str, errors: &mut Vec<String>, map: &BTreeMap<&str, Raw>| -> Vec<f64> {
        match map.get(key) {
            None => Vec::new(),
            Some(raw) => {
                let mut out = Vec::new();
                for tok in raw.value.split(',') {
                    match tok.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => out.push(v),
                        _ => {
                            errors.push(format!(
                                "line {}: `{key}` entry `{}` is not a finite number",
                                raw.line,
                                tok.trim()
                            ));
                        }
                    }
                }
                out
            }
        }
    };

    let h = get_f64("h", &mut errors).map(|(v, l)| {
        if v <= 0.0 {
            errors.push(format!("line {l}: `h` must be positive"));
        }
        v
    });
    let h_list = parse_list("h_list", &mut errors, &map);
    for &hv in &h_list {
        if hv <= 0.0 {
            errors.push("`h_list` entries must be positive".to_string());
        }
    }
    let levels = match map.get("levels") {
        None => 1usize,
        Some(raw) => match raw.value.parse::<usize>() {
            Ok(v) if v >= 1 => v,
            _ => {
                errors.push(format!("line {}: `levels` must be a positive integer", raw.line));
                1
            }
        },
    };
    let quad_order = match map.get("quad_order") {
        None => 0usize,
        Some(raw) => match raw.value.parse::<usize>() {
            Ok(v) if v >= 2 => v,
            _ => {
                errors.push(format!("line {}: `quad_order` must be an integer >= 2", raw.line));
                0
            }
        },
    };
    let delta = get_f64("delta", &mut errors)
        .map(|(v, l)| {
            if v < 0.0 {
                errors.push(format!("line {l}: `delta` must be non-negative"));
            }
            v
        })
        .unwrap_or(0.0);
    let grading = get_f64("grading", &mut errors)
        .map(|(v, l)| {
            if v < 1.0 {
                errors.push(format!("line {l}: `grading` must be >= 1 (1 = uniform)"));
            }
            v
        })
        .unwrap_or(1.0);

    let lambda = get_f64("lambda", &mut errors).map(|(v, l)| {
        if let Some(spec) = &domain {
            let max = spec.lambda_n();
            if v > max {
                errors.push(format!("line {l}: lambda exceeds lambda(N)={max}"));
            }
        }
        v
    });

    let seed = match map.get("seed") {
        None => 0u64,
        Some(raw) => match raw.value.parse::<u64>() {
            Ok(v) => v,
            Err(_) => {
                errors.push(format!("line {}: `seed` must be a non-negative integer", raw.line));
                0
            }
        },
    };
    let dt = get_f64("dt", &mut errors).map(|(v, l)| {
        if v <= 0.0 {
            errors.push(format!("line {l}: `dt` must be positive"));
        }
        v
    });
    let t_final = get_f64("T", &mut errors).map(|(v, l)| {
        if v <= 0.0 {
            errors.push(format!("line {l}: `T` must be positive"));
        }
        v
    });
    let check = map.get("check").and_then(|raw| match Check::parse(raw.value) {
        Some(c) => Some(c),
        None => {
            errors.push(format!("line {}: unknown check `{}`", raw.line, raw.value));
            None
        }
    });
    let eps = get_f64("eps", &mut errors).map(|(v, l)| {
        if v <= 0.0 {
            errors.push(format!("line {l}: `eps` must be positive"));
        }
        v
    });
    let eps_list = parse_list("eps_list", &mut errors, &map);
    let alpha = get_f64("alpha", &mut errors).map(|(v, l)| {
        if v <= 1.0 {
            errors.push(format!("line {l}: `alpha` must exceed 1"));
        }
        v
    });
    let rho = get_f64("rho", &mut errors)
        .map(|(v, l)| {
            if !(v > 0.0 && v <= 1.0) {
                errors.push(format!("line {l}: `rho` must lie in (0, 1]"));
            }
            v
        })
        .unwrap_or(0.3);
    let cg_tol = get_f64("cg_tol", &mut errors)
        .map(|(v, l)| {
            if v <= 0.0 {
                errors.push(format!("line {l}: `cg_tol` must be positive"));
            }
            v
        })
        .unwrap_or(1e-8);
    let cg_max_iter = match map.get("cg_max_iter") {
        None => 200usize,
        Some(raw) => match raw.value.parse::<usize>() {
            Ok(v) if v >= 1 => v,
            _ => {
                errors.push(format!("line {}: `cg_max_iter` must be a positive integer", raw.line));
                200
            }
        },
    };
    let mode = match map.get("mode") {
        None => HumMode::Control,
        Some(raw) => match raw.value {
            "control" => HumMode::Control,
            "scan" => HumMode::Scan,
            "gramian" => HumMode::Gramian,
            other => {
                errors.push(format!("line {}: unknown mode `{other}`", raw.line));
                HumMode::Control
            }
        },
    };
    let equation = match map.get("equation") {
        None => Equation::Wave,
        Some(raw) => match raw.value {
            "wave" => Equation::Wave,
            "schrodinger" => Equation::Schrodinger,
            other => {
                errors.push(format!("line {}: unknown equation `{other}`", raw.line));
                Equation::Wave
            }
        },
    };
    let t_list = parse_list("T_list", &mut errors, &map);
    let samples = match map.get("samples") {
        None => 16usize,
        Some(raw) => match raw.value.parse::<usize>() {
            Ok(v) if v >= 1 => v,
            _ => {
                errors.push(format!("line {}: `samples` must be a positive integer", raw.line));
                16
            }
        },
    };
    let allow_short_time = match map.get("allow_short_time") {
        None => false,
        Some(raw) => match raw.value {
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                errors.push(format!(
                    "line {}: `allow_short_time` must be true/false, got `{other}`",
                    raw.line
                ));
                false
            }
        },
    };
    let data = match map.get("data") {
        None => DataChoice::Smooth,
        Some(raw) => match raw.value {
            "smooth" => DataChoice::Smooth,
            "mode" => DataChoice::Mode,
            other => {
                errors.push(format!("line {}: unknown data choice `{other}`", raw.line));
                DataChoice::Smooth
            }
        },
    };
    let load = match map.get("load") {
        None => LoadChoice::One,
        Some(raw) => match raw.value {
            "one" => LoadChoice::One,
            "xn" => LoadChoice::Xn,
            "bump" => LoadChoice::Bump,
            other => {
                errors.push(format!("line {}: unknown load `{other}`", raw.line));
                LoadChoice::One
            }
        },
    };
    let study_task = map.get("study_task").and_then(|raw| match Task::parse(raw.value) {
        Some(Task::Study) | None => {
            errors.push(format!("line {}: invalid study_task `{}`", raw.line, raw.value));
            None
        }
        Some(t) => Some(t),
    });
    let out_dir =
        PathBuf::from(map.get("out_dir").map(|raw| raw.value.to_string()).unwrap_or_else(|| "out".into()));

    // task-specific requirements
    if let (Some(task), Some(_spec)) = (task, &domain) {
        let need = |key: &str, present: bool, errors: &mut Vec<String>| {
            if !present {
                errors.push(format!("task `{}` requires key `{key}`", task.name()));
            }
        };
        let has_mesh = h.is_some() || !h_list.is_empty();
        match task {
            Task::Hardy => {
                need("check", check.is_some(), &mut errors);
                need("h or h_list", has_mesh, &mut errors);
                if matches!(check, Some(Check::Tuu8)) {
                    need("eps", eps.is_some(), &mut errors);
                }
            }
            Task::Elliptic => {
                need("check", check.is_some(), &mut errors);
                need("lambda", lambda.is_some(), &mut errors);
                need("h or h_list", has_mesh, &mut errors);
                if matches!(check, Some(Check::Continuation)) && eps_list.is_empty() {
                    errors.push("elliptic continuation requires `eps_list`".to_string());
                }
            }
            Task::Wave | Task::Schrodinger => {
                need("lambda", lambda.is_some(), &mut errors);
                need("h", h.is_some(), &mut errors);
                need("T", t_final.is_some(), &mut errors);
            }
            Task::Hum => {
                need("lambda", lambda.is_some(), &mut errors);
                need("h", h.is_some(), &mut errors);
                need("dt", dt.is_some(), &mut errors);
                match mode {
                    HumMode::Control | HumMode::Gramian => {
                        need("T", t_final.is_some(), &mut errors)
                    }
                    HumMode::Scan => {
                        if t_list.is_empty() {
                            errors.push("hum scan requires `T_list`".to_string());
                        }
                    }
                }
            }
            Task::Semilinear => {
                need("lambda", lambda.is_some(), &mut errors);
                need("alpha", alpha.is_some(), &mut errors);
                need("h", h.is_some(), &mut errors);
            }
            Task::Study => {
                need("study_task", study_task.is_some(), &mut errors);
                if h_list.is_empty() {
                    errors.push("task `study` requires `h_list`".to_string());
                }
                need("lambda", lambda.is_some(), &mut errors);
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(RunConfig {
        task: task.unwrap(),
        domain: domain.unwrap().kind,
        h,
        h_list,
        levels,
        quad_order,
        delta,
        grading,
        lambda,
        seed,
        dt,
        t_final,
        check,
        eps,
        eps_list,
        alpha,
        rho,
        cg_tol,
        cg_max_iter,
        mode,
        equation,
        t_list,
        samples,
        allow_short_time,
        data,
        load,
        study_task,
        out_dir,
        raw_text: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_hardy_config_fills_defaults() {
        let cfg = parse_config(
            "task = hardy\ndomain = interval\nlength = 1\nh = 0.01\ncheck = mu\n",
        )
        .unwrap();
        assert_eq!(cfg.quad_order, 0); // dimension default applies downstream
        assert_eq!(cfg.grading, 1.0);
        assert_eq!(cfg.rho, 0.3);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn lambda_beyond_critical_named() {
        let err = parse_config(
            "task = elliptic\ndomain = tangent_disk\nradius = 1\nh = 0.1\nlambda = 1.25\ncheck = pohozaev\n",
        )
        .unwrap_err();
        assert!(
            err.iter().any(|e| e.contains("lambda exceeds lambda(N)=1")),
            "{err:?}"
        );
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_config(
            "task = hardy\ndomain = interval\nlength = 1\nh = 0.1\nh = 0.2\ncheck = mu\n",
        )
        .unwrap_err();
        assert!(
            err.iter().any(|e| e.contains("line 5") && e.contains("line 4")),
            "{err:?}"
        );
    }

    #[test]
    fn all_violations_reported() {
        let err = parse_config(
            "task = nosuch\ndomain = interval\nlength = -1\nbogus = 3\nh = 0.1\n",
        )
        .unwrap_err();
        assert!(err.len() >= 3, "{err:?}");
        assert!(err.iter().any(|e| e.contains("unknown task")));
        assert!(err.iter().any(|e| e.contains("unknown key `bogus`")));
        assert!(err.iter().any(|e| e.contains("positive")));
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = parse_config(
            "# a comment\n\ntask = semilinear # trailing\ndomain = interval\nlength = 1\nh = 0.05\nlambda = 0.2\nalpha = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.task, Task::Semilinear);
        assert_eq!(cfg.alpha, Some(3.0));
    }
}
