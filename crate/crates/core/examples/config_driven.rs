//! Driving a run from configuration text, as the `entrolimit` binary does.
use entrolimit::cli::{execute, parse_config};

fn main() -> entrolimit::Result<()> {
    let dir = std::env::temp_dir().join("entrolimit_config_example");
    let text = format!(
        "mode = run\nNx = 32\nNv = 128\nVmax = 9\nepsilon = 1e-2\nT_final = 0.05\nlimit_refine = 1\noutput.dir = {}\n",
        dir.display()
    );
    let cfg = parse_config(&text)?;
    print!("{}", cfg.echo());
    let outcome = execute(&cfg)?;
    println!("{}", outcome.summary);
    for a in &outcome.artifacts {
        println!("  {}", a.display());
    }
    Ok(())
}
