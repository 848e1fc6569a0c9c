// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Drives the HTTP API in-process: uploads the demo dataset, waits for the
//! job, follows the first suggestion and exports the result.
//!
//! ```text
//! cargo run --release -p tropic-service --example api_walkthrough
//! ```

use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tropic_service::{build_app, router, Settings};

async fn call(app: &Router, request: Request<Body>) -> (u16, String) {
    let response = app.clone().oneshot(request).await.expect("router is infallible");
    let status = response.status().as_u16();
    let body = response.into_body().collect().await.expect("body").to_bytes();
    (status, String::from_utf8_lossy(&body).into_owned())
}

async fn get(app: &Router, uri: &str) -> String {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await.1
}

fn multipart(parts: &[(&str, &str)]) -> (String, String) {
    let boundary = "walkthrough";
    let mut body = String::new();
    for (name, content) in parts {
        body.push_str(&format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}.csv\"\r\n\r\n{content}\r\n"
        ));
    }
    body.push_str(&format!("--{boundary}--\r\n"));
    (format!("multipart/form-data; boundary={boundary}"), body)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = tokio::task::spawn_blocking(|| build_app(Settings::default(), true)).await??;
    let app = router(state);

    let edges = get(&app, "/api/demo/edges.csv").await;
    let knowledge = get(&app, "/api/demo/base_knowledge.csv").await;
    println!("demo dataset: {} edge rows, {} annotations", edges.lines().count() - 1, knowledge.lines().count() - 1);

    let (content_type, body) = multipart(&[("edges", &edges), ("base_knowledge", &knowledge), ("config", r#"{"seed": 1}"#)]);
    let request = Request::builder()
        .method(Method::POST)
        .uri("/api/jobs")
        .header("content-type", content_type)
        .body(Body::from(body))?;
    let (status, reply) = call(&app, request).await;
    let id = serde_json::from_str::<Value>(&reply)?["id"].as_str().unwrap_or_default().to_string();
    println!("POST /api/jobs -> {status} {reply}");

    loop {
        let status: Value = serde_json::from_str(&get(&app, &format!("/api/jobs/{id}")).await)?;
        println!("phase {}", status["phase"]);
        if status["phase"] == "done" || status["phase"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }

    println!("summary {}", get(&app, &format!("/api/jobs/{id}/summary")).await);
    let suggestions: Value = serde_json::from_str(&get(&app, &format!("/api/jobs/{id}/suggestions?limit=3")).await)?;
    println!("suggestions {suggestions}");
    if let Some(top) = suggestions["suggestions"][0]["publisher"].as_str() {
        let request = Request::builder()
            .method(Method::POST)
            .uri(format!("/api/jobs/{id}/annotations"))
            .header("content-type", "application/json")
            .body(Body::from(json!({"publisher": top, "score": 80}).to_string()))?;
        let (status, reply) = call(&app, request).await;
        let reply: Value = serde_json::from_str(&reply)?;
        println!("annotate {top} = 80 -> {status}, {} records changed", reply["changed"].as_array().map_or(0, |c| c.len()));
    }

    let page = get(&app, &format!("/api/jobs/{id}/results?sort=confidence&order=desc&page_size=5")).await;
    println!("top results {page}");
    let csv = get(&app, &format!("/api/jobs/{id}/export")).await;
    for line in csv.lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
