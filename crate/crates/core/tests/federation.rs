use fedsim::cost_model::{time_ratio, CostParams};
use fedsim::data::{generate_synthetic_split, partition_by_class, Dataset, LocalShards};
use fedsim::federation::{
    make_plan, run_centralized, run_centralized_on, run_experiment, run_flavor1, run_flavor2,
    run_flavor3, FederationConfig, Flavor, PartitionMode,
};
use fedsim::nn::{batches_per_epoch, NetworkSpec};
use fedsim::simnet::TransferKind;

fn data() -> (Dataset, Dataset) {
    generate_synthetic_split(4, 40, 10, 5, 7).unwrap()
}

fn config(flavor: Flavor, agencies: usize) -> FederationConfig {
    let mut c = FederationConfig::new(flavor, NetworkSpec::mlp(5, &[8], 4).unwrap());
    c.agencies = agencies;
    c.rounds = 6;
    c.local_steps = 3;
    c.batch_size = 10;
    c.lr = 0.2;
    c.seed = 3;
    c
}

#[test]
fn flavor1_with_one_agency_is_centralized() {
    let (train, test) = data();
    let fed = run_experiment(&config(Flavor::Flavor1, 1), &train, &test).unwrap();
    let cen = run_experiment(&config(Flavor::Centralized, 1), &train, &test).unwrap();
    assert_eq!(fed.final_params, cen.final_params);
    assert_eq!(fed.accuracies(), cen.accuracies());
}

#[test]
fn flavor2_with_one_agency_is_centralized_on_the_shard() {
    let (train, test) = data();
    let mut f2 = config(Flavor::Flavor2, 1);
    f2.epochs_per_visit = 2;
    let out = run_experiment(&f2, &train, &test).unwrap();

    let mut cen = config(Flavor::Centralized, 1);
    cen.rounds = 1;
    cen.local_steps = 2 * batches_per_epoch(train.len(), cen.batch_size);
    let reference = run_experiment(&cen, &train, &test).unwrap();
    assert_eq!(out.final_params, reference.final_params);
    assert_eq!(out.final_accuracy(), reference.final_accuracy());
}

#[test]
fn zero_exchange_is_the_base_flavor() {
    let (train, test) = data();
    for flavor in [Flavor::Flavor1, Flavor::Flavor2] {
        let mut c = config(flavor, 4);
        c.partition = PartitionMode::ByClass;
        let plan = make_plan(&c, &train).unwrap();
        let base = match flavor {
            Flavor::Flavor1 => run_flavor1(&c, &train, &LocalShards::unchanged(&plan), &test),
            _ => run_flavor2(&c, &train, &LocalShards::unchanged(&plan), &test),
        }
        .unwrap();
        let exchanged = run_flavor3(&c, &train, &plan, &test).unwrap();
        assert_eq!(base.final_params, exchanged.final_params);
        assert_eq!(base.records, exchanged.records);
    }
}

#[test]
fn flavor1_bytes_follow_closed_form() {
    let (train, test) = data();
    for agencies in [1, 3, 4] {
        let c = config(Flavor::Flavor1, agencies);
        let out = run_experiment(&c, &train, &test).unwrap();
        let mb = c.model_bytes();
        for rec in &out.records {
            let r = rec.round as u64;
            assert_eq!(rec.bytes_up, r * agencies as u64 * mb);
            assert_eq!(rec.bytes_down, r * agencies as u64 * mb);
        }
        assert_eq!(
            out.ledger.total_bytes(),
            c.rounds as u64 * agencies as u64 * 2 * mb
        );
        assert_eq!(out.records.len(), c.rounds);
    }
}

#[test]
fn flavor2_bytes_are_hops_times_model() {
    let (train, test) = data();
    let mut c = config(Flavor::Flavor2, 4);
    c.passes = 3;
    c.model_bytes = Some(1234);
    let out = run_experiment(&c, &train, &test).unwrap();
    let hops = (c.passes * c.agencies) as u64;
    assert_eq!(out.records.len() as u64, hops);
    assert_eq!(out.ledger.total_bytes(), hops * 1234);
    // Only the first dispatch comes from the server.
    assert_eq!(out.ledger.bytes_down(), 1234);
}

#[test]
fn exchange_is_logged_as_data() {
    let (train, test) = data();
    let mut c = config(Flavor::Flavor1, 4);
    c.partition = PartitionMode::ByClass;
    c.exchange_per_class = 5;
    let out = run_experiment(&c, &train, &test).unwrap();
    // Every agency gets 5 of each of the 3 classes it lacks.
    let data_bytes = 4 * 3 * 5 * train.bytes_per_example();
    assert_eq!(out.ledger.bytes_of(TransferKind::Data), data_bytes);
    assert_eq!(
        out.ledger.bytes_of(TransferKind::Model),
        c.rounds as u64 * 4 * 2 * c.model_bytes()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let (train, test) = data();
    let mut c = config(Flavor::Flavor1, 4);
    c.partition = PartitionMode::ByClass;
    let one = run_experiment(&c, &train, &test).unwrap();
    for workers in [2, 3, 8] {
        c.workers = workers;
        let many = run_experiment(&c, &train, &test).unwrap();
        assert_eq!(one.records, many.records);
        assert_eq!(one.final_params, many.final_params);
    }
}

/// Centralized training for one pass over all data against one flavor-1
/// round of one local epoch per agency; equal shards, exact batches.
#[test]
fn matched_runs_reproduce_time_ratio() {
    let (train, test) = generate_synthetic_split(4, 60, 5, 3, 1).unwrap();
    for (agencies, k_n, model_bytes) in [(4usize, 10.0, 96u64), (2, 0.5, 40), (4, 3.0, 7)] {
        let shard = train.len() / agencies;
        let mut cen =
            FederationConfig::new(Flavor::Centralized, NetworkSpec::mlp(3, &[4], 4).unwrap());
        cen.agencies = agencies;
        cen.partition = PartitionMode::ByClass;
        cen.batch_size = 20;
        cen.rounds = 1;
        cen.local_steps = train.len() / cen.batch_size;
        cen.k_n = k_n;
        cen.model_bytes = Some(model_bytes);
        let mut fed = cen.clone();
        fed.flavor = Flavor::Flavor1;
        fed.local_steps = shard / fed.batch_size;

        let plan = partition_by_class(&train, agencies).unwrap();
        let t_cen = run_centralized_on(&cen, &train, &plan, &test)
            .unwrap()
            .final_record()
            .sim_time;
        let t_fed = run_experiment(&fed, &train, &test)
            .unwrap()
            .final_record()
            .sim_time;

        let unit_bytes = shard as f64 * train.bytes_per_example() as f64;
        let cp = CostParams::new(k_n, 1.0, agencies, model_bytes as f64 / unit_bytes).unwrap();
        let want = time_ratio(&cp);
        assert!(
            ((t_cen / t_fed) - want).abs() < 1e-9 * want,
            "A={agencies}: {} vs {want}",
            t_cen / t_fed
        );
    }
}

#[test]
fn sim_time_is_monotone_and_centralized_pays_transfer_once() {
    let (train, test) = data();
    let out = run_centralized(&config(Flavor::Centralized, 4), &train, &test).unwrap();
    let times: Vec<f64> = out.records.iter().map(|r| r.sim_time).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(
        out.ledger.bytes_of(TransferKind::Data),
        train.len() as u64 * train.bytes_per_example()
    );
    assert!(out
        .records
        .iter()
        .all(|r| r.bytes_up == out.ledger.bytes_up()));
}

#[test]
fn invalid_configs_are_rejected() {
    let (train, test) = data();
    let mut c = config(Flavor::Flavor1, 5);
    c.partition = PartitionMode::ByClass;
    assert!(matches!(
        run_experiment(&c, &train, &test),
        Err(fedsim::Error::Config(_))
    ));
    let mut c = config(Flavor::Flavor1, 2);
    c.exchange_per_class = 41;
    assert!(matches!(
        run_experiment(&c, &train, &test),
        Err(fedsim::Error::Config(_))
    ));
    let mut c = config(Flavor::Flavor1, 2);
    c.network = NetworkSpec::mlp(6, &[8], 4).unwrap();
    assert!(matches!(
        run_experiment(&c, &train, &test),
        Err(fedsim::Error::Config(_))
    ));
}
