use chaosbath_core::ensemble::{correlation_pair, propagate_ensemble, EnsembleSpec, Observable};
use chaosbath_core::laplace::{root_report, Branch, CharacteristicProblem, RootReport};
use chaosbath_core::model::ModelParams;
use chaosbath_core::response::{
    derive_kernel, equilibrium_ratio, fit_correlations, predicted_slope, secular_slope, CorrelationFit,
    EffectiveKernel, FitReport,
};
use chaosbath_core::superprop::{
    cat_state_density, cat_state_helpers, decoherence_factor, decoherence_factor_approx, decoherence_time,
    ehrenfest_check, packet_width, packet_width_simplified, width_linearized, DecoherenceTime, EhrenfestCheck,
    GaussianPacket,
};
use chaosbath_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{read_json, Outputs};
use crate::svg::{Plot, Series};
use crate::CliError;

pub struct Context {
    pub cfg: RunConfig,
    pub workers: Option<usize>,
    pub out: Outputs,
}

/// Where the correlation constants of a run came from.
#[derive(Debug, Clone, Copy)]
pub enum FitSource {
    Computed(CorrelationFit),
    File(CorrelationFit),
    Published,
}

impl FitSource {
    pub fn fit(&self) -> CorrelationFit {
        match self {
            FitSource::Computed(f) | FitSource::File(f) => *f,
            FitSource::Published => CorrelationFit::reference(),
        }
    }

    fn describe(&self, cfg: &RunConfig) -> String {
        match self {
            FitSource::Computed(_) => "fit: computed in this run".into(),
            FitSource::File(_) => format!(
                "fit: read from {}",
                cfg.fit_file.as_deref().map(|p| p.display().to_string()).unwrap_or_default()
            ),
            FitSource::Published => "fit: published constants at E_c = 0.38".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FitFile {
    #[serde(flatten)]
    report: Option<FitReport>,
    ehrenfest: Option<EhrenfestCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Context {
    fn spec(&self, coupled: bool) -> EnsembleSpec {
        let e = &self.cfg.ensemble;
        let mut spec = EnsembleSpec::new(e.n_traj, e.seed, self.cfg.model.e_c0, coupled);
        spec.workers = self.workers;
        spec
    }

    fn run_comments(&self) -> Vec<String> {
        let c = &self.cfg;
        vec![format!(
            "n_traj={} seed={} e_c0={} dt={} scheme={:?}",
            c.ensemble.n_traj, c.ensemble.seed, c.model.e_c0, c.integrator.dt, c.integrator.scheme
        )]
    }

    /// Fit from `fit_file` when configured.
    pub fn stored_fit(&self) -> Result<Option<FitSource>, CliError> {
        match &self.cfg.fit_file {
            Some(p) => {
                let file: FitFile = read_json(p)?;
                let report = file.report.ok_or_else(|| {
                    CliError::Config(format!("{} holds no fit: {}", p.display(), file.error.unwrap_or_default()))
                })?;
                Ok(Some(FitSource::File(report.fit)))
            }
            None => Ok(None),
        }
    }
}

/// Writes both correlation series and `fit.json`. A failed fit is recorded in
/// `fit.json` and returned as `Ok(None)`: the data are still valid output.
pub fn correlations(ctx: &mut Context) -> Result<Option<CorrelationFit>, CliError> {
    let params = ctx.cfg.model;
    let icfg = ctx.cfg.integrator.build(200.0, 0.5)?;
    let (xx, px) = correlation_pair(&ctx.spec(false), &params, &icfg)?;
    let comments = ctx.run_comments();
    ctx.out.series("corr_xx.csv", &xx, &[vec!["<x(0)x(t)>".to_string()], comments.clone()].concat());
    ctx.out.series("corr_px.csv", &px, &[vec!["<p_x(0)x(t)>".to_string()], comments].concat());

    let fit = match fit_correlations(&xx, &px) {
        Ok(fit) => fit,
        Err(e @ Error::Fit(_)) => {
            eprintln!("warning: correlation fit failed: {e}");
            ctx.out.json(
                "fit.json",
                &FitFile {
                    report: None,
                    ehrenfest: None,
                    error: Some(e.to_string()),
                },
            )?;
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let report = FitReport::new(fit, params)?;
    if let Some(w) = &report.kernel.warning {
        eprintln!("warning: {w}");
    }
    let ehrenfest = ehrenfest_check(&params, fit.alpha, ctx.cfg.quantum.action);
    ctx.out.json(
        "fit.json",
        &FitFile {
            report: Some(report),
            ehrenfest: Some(ehrenfest),
            error: None,
        },
    )?;

    let xx_fit: Vec<f64> = xx
        .times
        .iter()
        .map(|&t| fit.sigma_c * (-fit.alpha * t).exp() * (fit.omega * t).cos())
        .collect();
    let px_fit: Vec<f64> = px
        .times
        .iter()
        .map(|&t| fit.mu * (-fit.beta * t).exp() * (fit.omega_cap * t).sin())
        .collect();
    ctx.out.plot(
        "fig1.svg",
        &Plot::new("Correlation functions", "t", "correlation")
            .with(Series::line("<x(0)x(t)>", &xx.times, &xx.values))
            .with(Series::line("fit", &xx.times, &xx_fit).dashed())
            .with(Series::line("<p_x(0)x(t)>", &px.times, &px.values))
            .with(Series::line("fit", &px.times, &px_fit).dashed()),
    );
    Ok(Some(fit))
}

#[derive(Serialize)]
struct SlopeRecord {
    ratio: f64,
    predicted_slope: f64,
    measured_slope: Option<f64>,
}

#[derive(Serialize)]
struct EnergyFlowFile {
    fit: CorrelationFit,
    fit_source: String,
    equilibrium_ratio: f64,
    renormalized_frequency: f64,
    window: [f64; 2],
    runs: Vec<SlopeRecord>,
}

/// One `energy_<ratio>.csv` per configured ratio, with the measured
/// oscillator energies and the linear-response line `E_o(0) + (γ²A/m) t`.
pub fn energy_flow(ctx: &mut Context, source: FitSource) -> Result<(), CliError> {
    let params = ctx.cfg.model;
    let fit = source.fit();
    let kernel = derive_kernel(&fit, &params)?;
    let nu2 = params.renormalized_omega_sq(kernel.f0);
    if !(nu2 > 0.0) {
        return Err(CliError::Numeric(Error::InvalidParameter {
            name: "gamma",
            reason: format!("renormalized frequency squared is {nu2}; the oscillator is unstable"),
        }));
    }
    let nu = nu2.sqrt();
    let t0 = 1.0 / params.omega0;
    let icfg = ctx.cfg.integrator.build(6.0 * t0, 1.0)?;
    let t_end = icfg.n_steps as f64 * icfg.dt;
    let observables = [Observable::OscillatorEnergy, Observable::RenormalizedEnergy { f0: kernel.f0 }];

    let mut runs = Vec::new();
    let mut plot = Plot::new("Oscillator energy flow", "t", "<E_or(t)> - E_o(0)");
    for &ratio in &ctx.cfg.energy_flow.ratios.clone() {
        let p = params.with_energy_ratio(ratio);
        let avg = propagate_ensemble(&ctx.spec(true), &p, &icfg, &observables)?;
        let (eo, eor) = (&avg.series[0], &avg.series[1]);
        let slope = predicted_slope(&fit, &p);
        let measured = if t_end >= 5.0 * t0 {
            Some(secular_slope(eor, t0, 5.0 * t0, nu)?)
        } else {
            None
        };
        let rows: Vec<Vec<f64>> = (0..eo.len())
            .map(|i| {
                let t = eo.times[i];
                vec![
                    t,
                    eo.values[i],
                    eo.stderr[i],
                    eor.values[i],
                    eor.stderr[i],
                    p.e_o0 + slope * t,
                ]
            })
            .collect();
        let mut comments = ctx.run_comments();
        comments.push(source.describe(&ctx.cfg));
        comments.push(format!("ratio={ratio} e_o0={} gamma={}", p.e_o0, p.gamma));
        comments.push(format!(
            "predicted_slope={slope:e} measured_slope={}",
            measured.map_or("n/a".into(), |m| format!("{m:e}"))
        ));
        ctx.out.table(
            &format!("energy_{ratio}.csv"),
            &comments,
            &["t", "eo_mean", "eo_stderr", "eor_mean", "eor_stderr", "eor_linear"],
            &rows,
        );
        let shifted: Vec<f64> = eor.values.iter().map(|v| v - p.e_o0).collect();
        plot = plot.with(Series::line(format!("E_o/E_c = {ratio}"), &eor.times, &shifted));
        runs.push(SlopeRecord {
            ratio,
            predicted_slope: slope,
            measured_slope: measured,
        });
    }
    ctx.out.json(
        "energy_flow.json",
        &EnergyFlowFile {
            fit,
            fit_source: source.describe(&ctx.cfg),
            equilibrium_ratio: equilibrium_ratio(&fit, &params),
            renormalized_frequency: nu,
            window: [t0, 5.0 * t0],
            runs,
        },
    )?;
    ctx.out.plot("fig2.svg", &plot);
    Ok(())
}

fn damping_rate(fit: &CorrelationFit, params: &ModelParams) -> Result<EffectiveKernel, CliError> {
    let kernel = derive_kernel(fit, params)?;
    if !(kernel.lambda_ > 0.0) {
        return Err(CliError::Numeric(Error::InvalidParameter {
            name: "gamma",
            reason: "damping rate is zero; time axes are measured in units of 1/Lambda".into(),
        }));
    }
    Ok(kernel)
}

fn lambda_grid(lambda: f64, lt_max: f64, points: usize) -> Vec<(f64, f64)> {
    (0..points)
        .map(|i| {
            let lt = lt_max * i as f64 / (points - 1) as f64;
            (lt, lt / lambda)
        })
        .collect()
}

/// `fig3_gamma<g>.csv`: squared packet width over `σ²` against `ΛT`.
pub fn gaussian(ctx: &mut Context, source: FitSource) -> Result<(), CliError> {
    let params = ctx.cfg.model;
    let kernel = damping_rate(&source.fit(), &params)?;
    let q = ctx.cfg.quantum.clone();
    let packet = GaussianPacket::ground_state(&params, 0.0, 0.0);
    let sig2 = packet.sigma * packet.sigma;
    let grid = lambda_grid(kernel.lambda_, q.width_lambda_t_max, q.points);
    let mut plot = Plot::new("Squared packet width", "Lambda T", "sigma^2(T) / sigma^2");
    for &g in &q.width_gammas {
        let k = EffectiveKernel::synthetic(&params, kernel.lambda_, g)?;
        let rows: Vec<Vec<f64>> = grid
            .iter()
            .map(|&(lt, t)| {
                vec![
                    lt,
                    t,
                    packet_width(t, &k, &packet) / sig2,
                    packet_width_simplified(t, &k, &packet) / sig2,
                    width_linearized(t, &k, &params, &packet).sigma2 / sig2,
                ]
            })
            .collect();
        let mut comments = vec![
            source.describe(&ctx.cfg),
            format!("Lambda={:e} Gamma={g} eps={:e} sigma={:e}", k.lambda_, k.eps, packet.sigma),
        ];
        if let Some(w) = &k.warning {
            comments.push(format!("warning: {w}"));
        }
        ctx.out.table(
            &format!("fig3_gamma{g}.csv"),
            &comments,
            &["lambda_t", "t", "exact", "simplified", "linearized"],
            &rows,
        );
        let lt: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let w: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        plot = plot.with(Series::line(format!("Gamma = {g}"), &lt, &w));
    }
    ctx.out.plot("fig3.svg", &plot);
    Ok(())
}

#[derive(Serialize)]
struct DecoherenceFile {
    fit_source: String,
    lambda: f64,
    quanta: f64,
    gamma_big: f64,
    decoherence_time: DecoherenceTime,
    g_exact_at_t_prime: f64,
    g_approx_at_t_prime: f64,
    interference_exact: f64,
    interference_approx: f64,
    ehrenfest: EhrenfestCheck,
}

/// `fig4.csv` with exact and approximate `g(T)`, the decoherence-time
/// estimate, and one cat-state density grid.
pub fn decoherence(ctx: &mut Context, source: FitSource) -> Result<(), CliError> {
    let params = ctx.cfg.model;
    let fit = source.fit();
    let kernel = damping_rate(&fit, &params)?;
    let q = ctx.cfg.quantum.clone();
    let k = EffectiveKernel::synthetic(&params, kernel.lambda_, q.decoherence_gamma)?;
    let rows: Vec<Vec<f64>> = lambda_grid(k.lambda_, q.decoherence_lambda_t_max, q.points)
        .into_iter()
        .map(|(lt, t)| vec![lt, t, decoherence_factor(t, &k), decoherence_factor_approx(t, &k)])
        .collect();
    let header = vec![
        source.describe(&ctx.cfg),
        format!("Lambda={:e} Gamma={} eps={:e}", k.lambda_, k.gamma_big, k.eps),
    ];
    ctx.out
        .table("fig4.csv", &header, &["lambda_t", "t", "g_exact", "g_approx"], &rows);
    let lt: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ge: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let ga: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    ctx.out.plot(
        "fig4.svg",
        &Plot::new(format!("Decoherence factor, Gamma = {}", k.gamma_big), "Lambda T", "g(T)")
            .with(Series::line("exact", &lt, &ge))
            .with(Series::line("2 Gamma Lambda T / (1 + 2 Gamma Lambda T)", &lt, &ga).dashed()),
    );

    let kq = EffectiveKernel::synthetic(&params, kernel.lambda_, q.quanta_gamma)?;
    let dt = decoherence_time(q.quanta, &kq)?;
    let (ge, ga) = (decoherence_factor(dt.t_prime, &kq), decoherence_factor_approx(dt.t_prime, &kq));
    ctx.out.json(
        "decoherence.json",
        &DecoherenceFile {
            fit_source: source.describe(&ctx.cfg),
            lambda: kq.lambda_,
            quanta: q.quanta,
            gamma_big: kq.gamma_big,
            decoherence_time: dt,
            g_exact_at_t_prime: ge,
            g_approx_at_t_prime: ga,
            interference_exact: (-q.quanta * ge).exp(),
            interference_approx: (-q.quanta * ga).exp(),
            ehrenfest: ehrenfest_check(&params, fit.alpha, q.action),
        },
    )?;

    let sigma = GaussianPacket::ground_state(&params, 0.0, 0.0).sigma;
    let packet = GaussianPacket::ground_state(&params, 0.0, 6.0 * sigma);
    let t = 0.05 / k.lambda_;
    let hp = cat_state_helpers(t, &k, &params, &packet)?;
    let sd = hp.variance.sqrt();
    let (lo, hi) = (hp.q.min(0.0) - 6.0 * sd, hp.q.max(0.0) + 6.0 * sd);
    let n = 401;
    let r: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let cat = cat_state_density(&r, t, &k, &params, &packet)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![r[i], cat.rho11[i], cat.rho22[i], cat.interference[i], cat.total[i]])
        .collect();
    ctx.out.table(
        "cat_density.csv",
        &[format!(
            "Gamma={} Lambda T=0.05 q0={:e} sigma={:e} attenuation={:e}",
            k.gamma_big, packet.q0, packet.sigma, hp.attenuation
        )],
        &["r", "rho11", "rho22", "interference", "total"],
        &rows,
    );
    Ok(())
}

#[derive(Serialize)]
struct RootsFile {
    fit_source: String,
    reference_centre: RootReport,
    reference_relative: RootReport,
    fitted_centre: Option<RootReport>,
    fitted_relative: Option<RootReport>,
}

/// Roots of the characteristic quartic for the reference inputs and for the
/// configured coupling and fit.
pub fn roots(ctx: &mut Context, source: FitSource) -> Result<(), CliError> {
    let params = ctx.cfg.model;
    let fit = source.fit();
    let fitted = |b: Branch| -> Result<Option<RootReport>, CliError> {
        if params.gamma == 0.0 {
            return Ok(None);
        }
        Ok(Some(root_report(&CharacteristicProblem::from_fit(&fit, &params, b))?))
    };
    let file = RootsFile {
        fit_source: source.describe(&ctx.cfg),
        reference_centre: root_report(&CharacteristicProblem::reference(Branch::Centre))?,
        reference_relative: root_report(&CharacteristicProblem::reference(Branch::Relative))?,
        fitted_centre: fitted(Branch::Centre)?,
        fitted_relative: fitted(Branch::Relative)?,
    };
    ctx.out.json("roots.json", &file)
}
