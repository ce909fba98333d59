//! Command-line front end: calibrate thresholds from a scenario,
//! run a single mission, or sweep an attack campaign to CSV.

use clap::{Parser, Subcommand};
use rvguard::batch::{run_campaign, to_csv, CampaignConfig};
use rvguard::calib::{calibrate, Calibration};
use rvguard::config::Scenario;
use rvguard::metrics::{final_deviation, mission_outcome};
use rvguard::mission::{run_mission, MissionSetup};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rvguard", version, about = "Sensor-deception detection, diagnosis, and recovery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive detector thresholds, diagnosis deltas, the detection
    /// window, and the recovery gain from attack-free ensembles.
    Calibrate {
        /// Scenario TOML describing the mission template.
        #[arg(long)]
        scenario: PathBuf,
        /// Where to write the calibration JSON.
        #[arg(long, default_value = "calibration.json")]
        out: PathBuf,
    },
    /// Run the scenario once and print the outcome.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Calibration JSON produced by the calibrate step.
        #[arg(long)]
        calibration: PathBuf,
        /// Run without the protection stack.
        #[arg(long)]
        unguarded: bool,
    },
    /// Sweep a campaign of attacked and wind-only missions to CSV.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        /// Attacked missions to run.
        #[arg(long, default_value_t = 25)]
        attacked: usize,
        /// Wind-only missions to run.
        #[arg(long, default_value_t = 10)]
        benign: usize,
        /// Comma-separated sensor-subset sizes to cycle through.
        #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
        sensors: Vec<usize>,
        /// Bias magnitude as a multiple of the diagnosis delta.
        #[arg(long, default_value_t = 3.0)]
        bias_factor: f64,
        /// Attack onset (s).
        #[arg(long, default_value_t = 6.0)]
        onset: f64,
        /// Attack duration (s); infinite by default.
        #[arg(long, default_value_t = f64::INFINITY)]
        duration: f64,
        /// Seed offset separating campaigns.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> rvguard::Result<()> {
    match cmd {
        Command::Calibrate { scenario, out } => {
            let s = Scenario::load(scenario)?;
            let cal = calibrate(&s.mission, &s.calibration)?;
            cal.save(&out)?;
            println!(
                "calibrated: window {:.3} s, instant thresholds written to {}",
                cal.window_s,
                out.display()
            );
            Ok(())
        }
        Command::Run {
            scenario,
            calibration,
            unguarded,
        } => {
            let s = Scenario::load(scenario)?;
            let cal = Calibration::load(calibration)?;
            let guard = cal.guard(s.mission.dt(), &s.recovery);
            let log = run_mission(MissionSetup {
                mission: &s.mission,
                guard: (!unguarded).then_some(&guard),
                attacks: s.attacks.clone(),
                collect_streams: false,
            })?;
            println!("outcome:        {}", mission_outcome(&log).as_str());
            println!("final deviation: {:.3} m", final_deviation(&log));
            if let Some(t) = log.attack_onset {
                println!("attack onset:   {t:.3} s");
            }
            if let Some(t) = log.detected_at {
                println!("detected at:    {t:.3} s");
            }
            if let Some(d) = &log.diagnosis {
                let names: Vec<String> = d.sensors.iter().map(|s| s.to_string()).collect();
                println!(
                    "diagnosed:      {} at {:.3} s{}",
                    names.join("+"),
                    d.decided_at,
                    if d.fallback { " (timeout fallback)" } else { "" }
                );
            }
            if let Some(t) = log.completed_at {
                println!("completed at:   {t:.3} s");
            }
            if let Some(t) = log.crashed_at {
                println!("crashed at:     {t:.3} s");
            }
            if let Some(t) = log.stalled_at {
                println!("stalled at:     {t:.3} s");
            }
            Ok(())
        }
        Command::Batch {
            scenario,
            calibration,
            out,
            attacked,
            benign,
            sensors,
            bias_factor,
            onset,
            duration,
            seed_offset,
        } => {
            let s = Scenario::load(scenario)?;
            let cal = Calibration::load(calibration)?;
            let cfg = CampaignConfig {
                template: s.mission.clone(),
                recovery: s.recovery.clone(),
                attacked_runs: attacked,
                benign_runs: benign,
                sensor_counts: sensors,
                bias_factor,
                attack_onset: onset,
                attack_duration: duration,
                seed_offset,
            };
            let report = run_campaign(&cfg, &cal)?;
            let rows: Vec<_> = report.runs.iter().map(|r| r.metrics.clone()).collect();
            std::fs::write(&out, to_csv(&rows))?;
            let sm = &report.summary;
            println!("report written to {}", out.display());
            println!(
                "attacked {} | detected {} | exact diagnoses {} ({:.0}%) | successes {} ({:.0}%)",
                sm.attacked_runs,
                sm.detected,
                sm.exact_diagnoses,
                100.0 * sm.true_positive_rate(),
                sm.successes,
                100.0 * sm.success_rate()
            );
            println!(
                "wind-only {} | false alarms {} ({:.0}%)",
                sm.benign_runs,
                sm.false_alarms,
                100.0 * sm.false_positive_rate()
            );
            Ok(())
        }
    }
}
