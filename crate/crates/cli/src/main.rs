//! `otfs`: interference maps, BER sweeps and spectra as CSV files.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numeric or
//! runtime failures of the simulator, 1 for I/O errors.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use otfs_core::grid::{random_symbols, Constellation, SeedSpec};
use otfs_core::harness::{ber_csv, sweep};
use otfs_core::interference::{fmt_value, fold_iq, measure_interference_mc, DDMaps, MapMeta};
use otfs_core::modem::{add_cp, idzt};
use otfs_core::waveform::{apply_filter, psd_estimate, to_analog};
use otfs_core::OtfsError;

use settings::{Overrides, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] OtfsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                OtfsError::Config(_) | OtfsError::InvalidParams(_) | OtfsError::CpOutOfRange { .. } | OtfsError::Dimension { .. },
            ) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "otfs", version, about = "Band-limited receiver analysis for rectangular-pulse OTFS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deviation coefficients C[k,l,l]: k,l,mag,phase_rad
    Coeffs(Run),
    /// IDDI power: k,l,v_analytic[,v_mc]
    Iddi(Run),
    /// SIR map in dB: k,l,sir_db
    Sir(Run),
    /// BER sweep: esn0_db,ber,ci_lo,ci_hi,bits,frames
    Ber(Run),
    /// Spectrum with and without the receiver filter
    Psd(Run),
    /// Re-run the command recorded in a manifest
    Replay {
        manifest: PathBuf,
        /// Output path [default: the recorded one]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct Run {
    #[command(flatten)]
    overrides: Overrides,
    /// Output CSV path; the manifest goes to <out>.manifest.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    settings: Settings,
    seed: u64,
    tool_version: String,
    outputs: Vec<String>,
    filter_fingerprint: Option<String>,
    map: Option<MapMeta>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otfs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    let (name, settings, out) = match cmd {
        Command::Replay { manifest, out } => {
            let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::Config(format!("cannot read {}: {e}", manifest.display())))?;
            let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad manifest {}: {e}", manifest.display())))?;
            let out = out.or_else(|| m.outputs.first().map(PathBuf::from));
            (m.command, m.settings, out)
        }
        Command::Coeffs(r) => ("coeffs".into(), Settings::resolve(&r.overrides)?, r.out),
        Command::Iddi(r) => ("iddi".into(), Settings::resolve(&r.overrides)?, r.out),
        Command::Sir(r) => ("sir".into(), Settings::resolve(&r.overrides)?, r.out),
        Command::Ber(r) => ("ber".into(), Settings::resolve(&r.overrides)?, r.out),
        Command::Psd(r) => ("psd".into(), Settings::resolve(&r.overrides)?, r.out),
    };
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    if let Some(t) = settings.threads {
        // A second initialization in the same process is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let (csv, fingerprint, map) = match name.as_str() {
        "coeffs" | "iddi" | "sir" => run_map(&name, &settings)?,
        "ber" => run_ber(&settings)?,
        "psd" => run_psd(&settings)?,
        other => return Err(CliError::Config(format!("unknown command {other:?} in manifest"))),
    };
    write(&out, &csv)?;
    let manifest = RunManifest {
        command: name,
        seed: settings.seed,
        settings,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        outputs: vec![out.display().to_string()],
        filter_fingerprint: fingerprint,
        map,
    };
    let mpath = PathBuf::from(format!("{}.manifest.json", out.display()));
    write(&mpath, &(serde_json::to_string_pretty(&manifest).expect("plain data serializes") + "\n"))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.into(),
        source: e,
    })
}

type Output = (String, Option<String>, Option<MapMeta>);

fn run_map(name: &str, s: &Settings) -> Result<Output, CliError> {
    let p = s.params()?;
    let h = s.filter_spec(&p)?;
    let tables = fold_iq(&p, &h);
    let maps = DDMaps::compute(&tables, p.n, 1.0);
    let mc = if name == "iddi" && s.mc_frames > 0 {
        Some(measure_interference_mc(&p, &h, s.mc_frames, s.seed)?)
    } else {
        None
    };
    let mut csv = String::new();
    csv.push_str(match (name, &mc) {
        ("coeffs", _) => "k,l,mag,phase_rad\n",
        ("iddi", None) => "k,l,v_analytic\n",
        ("iddi", Some(_)) => "k,l,v_analytic,v_mc\n",
        _ => "k,l,sir_db\n",
    });
    for k in 0..p.n {
        for l in 0..p.m {
            let i = maps.at(k, l);
            let row = match name {
                "coeffs" => format!("{},{}", fmt_value(maps.c_self[i].norm()), fmt_value(maps.c_self[i].arg())),
                "iddi" => match &mc {
                    Some(v) => format!("{},{}", fmt_value(maps.v[i]), fmt_value(v[i])),
                    None => fmt_value(maps.v[i]),
                },
                _ => fmt_value(maps.sir_db[i]),
            };
            csv.push_str(&format!("{k},{l},{row}\n"));
        }
    }
    Ok((csv, Some(h.fingerprint()), Some(MapMeta::from_tables(&tables))))
}

fn run_ber(s: &Settings) -> Result<Output, CliError> {
    let cfg = s.experiment()?;
    let fingerprint = cfg.filter()?.map(|h| h.fingerprint());
    let points = sweep(&cfg)?;
    Ok((ber_csv(&points), fingerprint, None))
}

fn run_psd(s: &Settings) -> Result<Output, CliError> {
    let p = s.params()?;
    let h = s.filter_spec(&p)?;
    let nfft = s.nfft.unwrap_or(4 * p.fine_per_slot());
    let frames = s.frames.clamp(1, 64);
    let c = Constellation::qpsk();
    let mut acc: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    for f in 0..frames {
        let x = random_symbols(&p, &c, SeedSpec::new(s.seed, f as u64));
        let w = to_analog(&add_cp(&idzt(&x), p.cp_len)?, &p)?;
        let raw = psd_estimate(&w, nfft, nfft / 2)?;
        let filt = psd_estimate(&apply_filter(&w, &h)?, nfft, nfft / 2)?;
        match &mut acc {
            None => acc = Some((raw.freq_hz, raw.psd, filt.psd)),
            Some((_, a, b)) => {
                a.iter_mut().zip(&raw.psd).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(&filt.psd).for_each(|(x, y)| *x += y);
            }
        }
    }
    let (freq, raw, filt) = acc.expect("at least one frame");
    let db = |v: f64| 10.0 * (v / frames as f64).max(1e-300).log10();
    let mut csv = String::from("freq_hz,psd_db_unfiltered,psd_db_filtered\n");
    for ((f, a), b) in freq.iter().zip(&raw).zip(&filt) {
        csv.push_str(&format!("{},{},{}\n", fmt_value(*f), fmt_value(db(*a)), fmt_value(db(*b))));
    }
    Ok((csv, Some(h.fingerprint()), None))
}
