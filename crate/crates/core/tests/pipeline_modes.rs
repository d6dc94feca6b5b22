use agentrag_core::bench::index_digest;
use agentrag_core::corpus::{generate_corpus, CorpusSpec};
use agentrag_core::costmodel::{fit_omega, predict_async, CostParams};
use agentrag_core::embedder::LatencyParams;
use agentrag_core::pipeline::{run_pipeline, Mode, PipelineConfig};
use agentrag_core::vecindex::{read_snapshot, write_snapshot, Metric, VectorIndex};
use proptest::prelude::*;

fn base(mode: Mode, dim: usize) -> PipelineConfig {
    PipelineConfig {
        mode,
        dim,
        workers: 3,
        embed_workers: 3,
        upsert_workers: 2,
        ..PipelineConfig::default()
    }
}

#[test]
fn sharded_and_flat_ingest_agree_with_snapshot_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        total_nodes: 777,
        file_count: 13,
        node_chars: 120,
        ..CorpusSpec::default()
    };
    let m = generate_corpus(&spec, dir.path()).unwrap();
    let cfg = base(Mode::Streaming, 24);
    let (_, flat) = run_pipeline(&cfg, &m, VectorIndex::flat(24, Metric::Ip)).unwrap();
    let (_, sharded) = run_pipeline(&cfg, &m, VectorIndex::sharded(24, Metric::Ip, 5).unwrap()).unwrap();
    assert_eq!(index_digest(&flat).unwrap(), index_digest(&sharded).unwrap());

    let mut buf = Vec::new();
    write_snapshot(&sharded, &mut buf).unwrap();
    let restored = VectorIndex::Flat(read_snapshot(buf.as_slice()).unwrap());
    assert_eq!(restored.entries_by_id(), flat.entries_by_id());
    let q = flat.get(17).unwrap().to_vec();
    assert_eq!(restored.search(&q, 5).unwrap(), sharded.search(&q, 5).unwrap());
    assert_eq!(flat.search(&q, 1).unwrap()[0].id, 17);
}

#[test]
fn l2_metric_keeps_raw_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        total_nodes: 40,
        file_count: 2,
        node_chars: 50,
        ..CorpusSpec::default()
    };
    let m = generate_corpus(&spec, dir.path()).unwrap();
    let cfg = PipelineConfig {
        metric: Metric::L2,
        ..base(Mode::PipelineParallelSync, 16)
    };
    let (_, idx) = run_pipeline(&cfg, &m, VectorIndex::flat(16, Metric::L2)).unwrap();
    let norms: Vec<f32> = idx
        .entries_by_id()
        .iter()
        .map(|(_, v)| v.iter().map(|x| x * x).sum::<f32>().sqrt())
        .collect();
    assert!(norms.iter().any(|n| (n - 1.0).abs() > 1e-3));
}

#[test]
fn streaming_embed_stage_tracks_async_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        total_nodes: 256,
        file_count: 8,
        node_chars: 64,
        ..CorpusSpec::default()
    };
    let m = generate_corpus(&spec, dir.path()).unwrap();
    let cfg = PipelineConfig {
        embed_batch: 16,
        embed_workers: 4,
        latency: LatencyParams::new(4.0, 0.25),
        ..base(Mode::Streaming, 16)
    };
    let (res, _) = run_pipeline(&cfg, &m, VectorIndex::flat(16, Metric::Ip)).unwrap();
    // 16 batches of 8 ms over 4 workers
    let params = CostParams::new(256, 16, 4, 4.0, 0.25);
    assert_eq!(predict_async(&params), 32.0);
    let omega = fit_omega(res.timings.embed_s * 1e3, &params).unwrap();
    assert!((-1.0..16.0).contains(&omega), "omega = {omega} ms");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn streaming_conserves_chunks_under_any_sizing(
        nodes in 1usize..300,
        files in 1usize..9,
        queue in 1usize..5,
        be in 1usize..40,
        bu in 1usize..40,
        coalesce in 1usize..100,
        workers in 1usize..5,
    ) {
        prop_assume!(nodes >= files);
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec { total_nodes: nodes, file_count: files, node_chars: 20, ..CorpusSpec::default() };
        let m = generate_corpus(&spec, dir.path()).unwrap();
        let cfg = PipelineConfig {
            queue_capacity: queue,
            embed_batch: be,
            upsert_batch: bu,
            coalesce_target: coalesce,
            workers,
            embed_workers: workers,
            upsert_workers: workers,
            ..base(Mode::Streaming, 8)
        };
        let (res, idx) = run_pipeline(&cfg, &m, VectorIndex::flat(8, Metric::Ip)).unwrap();
        prop_assert_eq!(res.index_size, nodes);
        let ids: Vec<u64> = idx.entries_by_id().into_iter().map(|(id, _)| id).collect();
        prop_assert_eq!(ids, (0..nodes as u64).collect::<Vec<_>>());

        let seq = PipelineConfig { mode: Mode::Sequential, ..cfg };
        let (_, reference) = run_pipeline(&seq, &m, VectorIndex::flat(8, Metric::Ip)).unwrap();
        prop_assert_eq!(index_digest(&idx).unwrap(), index_digest(&reference).unwrap());
    }
}
