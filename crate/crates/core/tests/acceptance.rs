use std::process::ExitCode;

use qrecycle_core::acceptance::run_all;
use qrecycle_core::mc::Workers;

fn main() -> ExitCode {
    let results = run_all(Workers::default());
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
