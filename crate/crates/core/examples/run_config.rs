//! Driving the batch front end from a config string.

use contraction::cli::{cmd_ruin, cmd_tail, RunConfig};

const TAIL: &str = r#"
command = "tail"
grid = [10.0, 20.0, 40.0]

[model]
family = "exponential"
factors = [{ family = "beta", params = { alpha = 2.0, beta = 1.0 } }]
"#;

const RUIN: &str = r#"
command = "ruin"
grid = [50.0, 400.0]

[model]
family = "kotz"
params = { gamma = 0.5 }

[risk]
upsilon = { family = "pareto", params = { gamma = 1.0 } }
pi = [0.5, 0.3]
delta = 0.05
subexponential = true

[output]
format = "json"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = cmd_tail(&RunConfig::from_toml(TAIL)?)?;
    print!("{}", out.body);
    let out = cmd_ruin(&RunConfig::from_toml(RUIN)?)?;
    print!("{}", out.body);
    Ok(())
}
