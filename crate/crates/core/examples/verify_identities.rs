//! Run a small identity suite from configuration text and print the table.

use stochfrac::config::Config;
use stochfrac::properties::{all_passed, format_table, run_suite, SuiteConfig};

const SUITE: &str = "
[process ou]
kind = ou
theta = 1
sigma = 0.2
x0 = 1
paths = 4000
seed = 3

[process t]
kind = deterministic
drift = t

[process one_minus_t]
kind = deterministic
drift = one_minus_t

[check quick]
processes = ou, t
pairs = t:one_minus_t, ou:t
alphas = 0.25, 0.75
nodes = 401
series = true
";

fn main() -> stochfrac::Result<()> {
    let suite = SuiteConfig::from_config(&Config::parse(SUITE)?)?;
    let reports = run_suite(&suite)?;
    print!("{}", format_table(&reports));
    println!("all passed: {}", all_passed(&reports));
    Ok(())
}
