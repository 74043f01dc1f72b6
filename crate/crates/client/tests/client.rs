use std::net::SocketAddr;
use std::time::Duration;

use otf_client::{Client, ClientError};
use otf_core::api::{Action, CreateRunRequest};
use otf_core::config::{Algorithm, RunParams};
use otf_core::live::{Param, RunState};
use otf_service::{ServeConfig, Server};
use reqwest::StatusCode;

async fn client(tick_ms: u64) -> Client {
    let cfg = ServeConfig {
        addr: SocketAddr::from(([127, 0, 0, 1], 0)),
        tick_ms,
        assets: None,
    };
    let server = Server::bind(&cfg).await.unwrap();
    let addr = server.local_addr().unwrap();
    tokio::spawn(server.run());
    Client::new(format!("http://{addr}/"))
}

#[tokio::test(flavor = "multi_thread")]
async fn full_session() {
    let c = client(1).await;
    assert_eq!(c.objectives().await.unwrap().len(), 5);
    let mut req = CreateRunRequest::new(Algorithm::Nm, 4);
    req.config = RunParams {
        maxiter: Some(60),
        ..Default::default()
    };
    let info = c.create_run(&req).await.unwrap();
    assert_eq!(info.state, RunState::Created);
    assert_eq!(c.control(&info.run_id, Action::Start).await.unwrap(), RunState::Running);
    let ack = c.adjust(&info.run_id, Param::Alpha, 1e-4).await;
    // The run may already have finished on a fast machine.
    match ack {
        Ok(a) => assert!(a.applied_at_iteration >= 1),
        Err(e) => assert_eq!(e.status(), Some(StatusCode::CONFLICT)),
    }
    let events = c
        .follow(&info.run_id, Duration::from_millis(5), Duration::from_secs(30))
        .await
        .unwrap();
    let record = c.record(&info.run_id).await.unwrap();
    assert_eq!(record.events, events);
    assert_eq!(c.list_runs().await.unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn api_errors_carry_status_and_field() {
    let c = client(0).await;
    let mut req = CreateRunRequest::new(Algorithm::Ea, 1);
    req.config.pop_size = Some(1);
    let e = c.create_run(&req).await.unwrap_err();
    assert_eq!(e.status(), Some(StatusCode::BAD_REQUEST));
    assert_eq!(e.field(), Some("pop_size"));
    let e = c.run("nope").await.unwrap_err();
    assert_eq!(e.status(), Some(StatusCode::NOT_FOUND));
    assert!(matches!(e, ClientError::Api { .. }));

    let info = c.create_run(&CreateRunRequest::new(Algorithm::Gd, 1)).await.unwrap();
    c.control(&info.run_id, Action::Start).await.unwrap();
    let e = c.adjust_named(&info.run_id, "mutation_std", 1.0).await.unwrap_err();
    assert_eq!(e.status(), Some(StatusCode::BAD_REQUEST));
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let c = Client::new("http://127.0.0.1:9");
    let e = c.objectives().await.unwrap_err();
    assert!(matches!(e, ClientError::Transport(_)));
}
