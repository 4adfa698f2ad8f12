//! Drive the HTTP service in-process: register a dataset, run a job, fetch
//! a slice PNG and the label metrics.

use axum::body::Body;
use axum::http::Request;
use harpia::chunk::MemoryBudget;
use harpia::io::{meta_path_for, save_volume};
use harpia::service::{Service, ServiceConfig};
use harpia::{Shape, Volume};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(service: &Service, method: &str, uri: &str, body: Option<Value>) -> (u16, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = service.router().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

#[tokio::main]
async fn main() -> harpia::Result<()> {
    let dir = std::env::temp_dir().join("harpia-rest-example");
    std::fs::create_dir_all(&dir).map_err(|e| harpia::Error::Internal(e.to_string()))?;
    let data = dir.join("blobs.vol");
    let v = Volume::from_fn(Shape::new(16, 32, 32), |z, y, x| if (x / 8 + y / 8 + z / 8) % 2 == 0 { 200u8 } else { 30 });
    save_volume(&v, &data, &meta_path_for(&data))?;

    let mut cfg = ServiceConfig::new(MemoryBudget::fixed(1 << 20));
    cfg.workdir = Some(dir.join("work"));
    let service = Service::start(cfg)?;

    let (status, body) = call(&service, "POST", "/datasets", Some(json!({"data-path": data}))).await;
    let ds: Value = serde_json::from_slice(&body).unwrap();
    println!("POST /datasets -> {status} {ds}");
    let (status, body) = call(&service, "POST", "/jobs", Some(json!({"dataset": ds["id"], "op": "otsu"}))).await;
    let job: Value = serde_json::from_slice(&body).unwrap();
    println!("POST /jobs -> {status} state {}", job["state"]);
    let done = loop {
        let (_, body) = call(&service, "GET", &format!("/jobs/{}", job["id"]), None).await;
        let j: Value = serde_json::from_slice(&body).unwrap();
        if j["state"] != "queued" && j["state"] != "running" {
            break j;
        }
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    };
    println!("job finished: {} report {}", done["state"], done["report"]);
    let (status, png) = call(&service, "GET", &format!("/datasets/{}/slice/z/4", ds["id"]), None).await;
    println!("GET slice -> {status}, {} byte PNG", png.len());
    let (_, csv) = call(&service, "GET", &format!("/datasets/{}/metrics", ds["id"]), None).await;
    print!("metrics:\n{}", String::from_utf8_lossy(&csv));
    drop(service);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
