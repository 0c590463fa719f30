//! Initial-condition specs: `delta:K`, `uniform:A..B`, `csv:PATH`, plus the
//! mesh-only forms `zkb:EPS`, `gauss:VAR` and `mesh:PATH`.

use coopmotion::closed_forms::special::normal_cdf;
use coopmotion::closed_forms::ZkbSpec;
use coopmotion::fd_scheme::{discretize_initial, mesh_from_sites, MeshFn, SchemeKind, SchemeSpec};
use coopmotion::Pmf;

use crate::CliError;

fn read(path: &str, flag: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(flag, format!("cannot read {path:?}: {e}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, flag: &str, what: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::usage(flag, format!("{what} must be a number, got {s:?}")))
}

pub fn parse_pmf(spec: &str, flag: &str) -> Result<Pmf, CliError> {
    let (head, rest) = spec.split_once(':').ok_or_else(|| {
        CliError::usage(
            flag,
            format!("expected delta:K, uniform:A..B or csv:PATH, got {spec:?}"),
        )
    })?;
    match head {
        "delta" => Ok(Pmf::delta(parse_num(rest, flag, "delta site")?)),
        "uniform" => {
            let (a, b) = rest.split_once("..").ok_or_else(|| {
                CliError::usage(flag, format!("uniform needs A..B, got {rest:?}"))
            })?;
            Pmf::uniform(parse_num(a, flag, "A")?, parse_num(b, flag, "B")?)
                .map_err(|e| CliError::usage(flag, e.to_string()))
        }
        "csv" => {
            Pmf::from_csv(&read(rest, flag)?).map_err(|e| CliError::usage(flag, e.to_string()))
        }
        _ => Err(CliError::usage(
            flag,
            format!("unknown initial condition {head:?}"),
        )),
    }
}

/// A mesh initial condition for the scheme command.
pub fn parse_mesh(
    spec: &str,
    flag: &str,
    scheme: &SchemeSpec,
    window: (f64, f64),
) -> Result<MeshFn, CliError> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let runtime = |e: coopmotion::Error| CliError::usage(flag, e.to_string());
    match head {
        "heaviside" => discretize_initial(|x| if x >= 0.0 { 1.0 } else { 0.0 }, scheme, window)
            .map_err(runtime),
        "zkb" => {
            let eps: f64 = parse_num(rest, flag, "eps")?;
            let m = match scheme.kind() {
                SchemeKind::PLaplace { m, .. } => m,
                SchemeKind::Heat => {
                    return Err(CliError::usage(
                        flag,
                        "zkb seeds need the p_laplace kind".into(),
                    ))
                }
            };
            let prof = ZkbSpec::new(1.0 - eps, eps, m)
                .and_then(|z| z.at(0.0))
                .map_err(runtime)?;
            discretize_initial(|x| prof.cdf(x), scheme, window).map_err(runtime)
        }
        "gauss" => {
            let var: f64 = parse_num(rest, flag, "variance")?;
            if !(var > 0.0) {
                return Err(CliError::usage(
                    flag,
                    format!("variance must be positive, got {var}"),
                ));
            }
            discretize_initial(|x| normal_cdf(x / var.sqrt()), scheme, window).map_err(runtime)
        }
        "mesh" => {
            let (mut mesh, _) = MeshFn::from_csv(&read(rest, flag)?).map_err(runtime)?;
            if (mesh.dx - scheme.dx()).abs() > 1e-12 * scheme.dx() {
                return Err(CliError::usage(
                    flag,
                    format!(
                        "mesh dx {} does not match the scheme dx {}",
                        mesh.dx,
                        scheme.dx()
                    ),
                ));
            }
            mesh.dt = scheme.dt();
            Ok(mesh)
        }
        _ => {
            // lattice measures seed the mesh with their CDF at the sites
            let p = parse_pmf(spec, flag)?;
            let dx = scheme.dx();
            let lo = ((window.0 / dx).floor() as i64).min(p.offset() - 1);
            let hi = ((window.1 / dx).ceil() as i64).max(p.end() + 1);
            let cdf = p.cdf();
            Ok(mesh_from_sites(
                scheme,
                lo,
                (lo..=hi).map(|k| cdf.eval(k)).collect(),
            ))
        }
    }
}

pub fn parse_window(s: &str, flag: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| CliError::usage(flag, format!("expected A..B, got {s:?}")))?;
    let (a, b) = (parse_num(a, flag, "A")?, parse_num(b, flag, "B")?);
    if !(b > a) {
        return Err(CliError::usage(
            flag,
            format!("window end must exceed start, got {s}"),
        ));
    }
    Ok((a, b))
}
