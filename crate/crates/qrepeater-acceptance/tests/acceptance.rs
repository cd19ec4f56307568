//! Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

fn main() {
    let lines = qrepeater_acceptance::run_all();
    for l in &lines {
        println!("{}", l.text);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
