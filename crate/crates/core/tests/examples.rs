// Each example compiled as a module and run end to end.

#[path = "../examples/chevron.rs"]
mod chevron;
#[path = "../examples/device_fit.rs"]
mod device_fit;
#[path = "../examples/flux_laws.rs"]
mod flux_laws;
#[path = "../examples/lindblad.rs"]
mod lindblad;
#[path = "../examples/reflection.rs"]
mod reflection;
#[path = "../examples/run_config.rs"]
mod run_config;
#[path = "../examples/spectrum_sweep.rs"]
mod spectrum_sweep;
#[path = "../examples/transmon_levels.rs"]
mod transmon_levels;
#[path = "../examples/vacuum_rabi.rs"]
mod vacuum_rabi;

#[test]
fn chevron_runs() {
    chevron::run().unwrap();
}

#[test]
fn device_fit_runs() {
    device_fit::run().unwrap();
}

#[test]
fn flux_laws_runs() {
    flux_laws::run().unwrap();
}

#[test]
fn lindblad_runs() {
    lindblad::run().unwrap();
}

#[test]
fn reflection_runs() {
    reflection::run().unwrap();
}

#[test]
fn run_config_runs() {
    run_config::run().unwrap();
}

#[test]
fn spectrum_sweep_runs() {
    spectrum_sweep::run().unwrap();
}

#[test]
fn transmon_levels_runs() {
    transmon_levels::run().unwrap();
}

#[test]
fn vacuum_rabi_runs() {
    vacuum_rabi::run().unwrap();
}
