//! Runs the default battery of estimate checks and prints the summary table.

use soliton_forge::asymptotics::{verify_suite, write_summary, VerifyConfig};

fn main() -> soliton_forge::Result<()> {
    let reports = verify_suite(&VerifyConfig::default())?;
    write_summary(&reports, std::io::stdout())?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
    }
    Ok(())
}
