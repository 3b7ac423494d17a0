use hardy_radial::acceptance::run_suite;
use hardy_radial::stepper::IntegratorOptions;

fn main() {
    let reports = run_suite(None, &IntegratorOptions::default());
    for r in &reports {
        println!("{}", r.line());
        for c in &r.checks {
            println!("    {c}");
        }
    }
    let failed: Vec<u32> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("{}/{} criteria passed", reports.len() - failed.len(), reports.len());
    assert_eq!(reports.len(), 13);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
