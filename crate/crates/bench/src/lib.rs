//! Fixtures shared by the criterion benches.

use proxwarm_core::{
    agglomerate_group_average, build_benchmark, build_virtual_system, cluster_centers, cost_weight, cut_dendrogram,
    distance_matrix, preset_scenario, particle_filter, select_warm_start, FilterConfig, ParticleEnsemble, Trajectory,
    TrajectoryProblem, VirtualSystem,
};

pub fn preset_problem(name: &str) -> TrajectoryProblem {
    build_benchmark(&preset_scenario(name).expect("known preset")).expect("preset builds")
}

pub fn virtual_system(problem: &TrajectoryProblem) -> VirtualSystem {
    build_virtual_system(problem, proxwarm_core::filter::DEFAULT_NU).expect("virtual system")
}

pub fn ensemble(system: &VirtualSystem, seed: u64) -> ParticleEnsemble {
    particle_filter(system, &FilterConfig::new(system.dim(), seed)).expect("filter runs")
}

/// Filter, cluster at half the maximum height and select by merit.
pub fn filter_warm_start(problem: &TrajectoryProblem, seed: u64) -> Trajectory {
    let ens = ensemble(&virtual_system(problem), seed);
    let trajs: Vec<_> = (0..ens.len()).map(|i| ens.stacked(i)).collect();
    let d = distance_matrix(&trajs, &cost_weight(problem)).expect("distances");
    let assign = cut_dendrogram(&agglomerate_group_average(&d), 0.5).expect("cut");
    let centers = cluster_centers(&ens, &assign).expect("centers");
    select_warm_start(problem, &centers, proxwarm_core::problem::DEFAULT_MERIT_ALPHA)
        .expect("selection")
        .trajectory
}
