pub mod knn_oracle;
