use sritm_core::selfcheck::Suite;

use crate::config::log_resolved;
use crate::error::{CliError, CliResult};
use crate::{SelfcheckArgs, SuiteArg};

pub fn run(a: &SelfcheckArgs) -> CliResult<()> {
    let (name, suite) = match a.suite {
        SuiteArg::Gradcheck => ("gradcheck", Suite::GradCheck),
        SuiteArg::Paramcount => ("paramcount", Suite::ParamCount),
        SuiteArg::Oracles => ("oracles", Suite::Oracles),
    };
    log_resolved("selfcheck", &[("suite", name.into())]);
    let results = suite.run()?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} checks failed", results.len())));
    }
    println!("{name}: all {} checks passed", results.len());
    Ok(())
}
