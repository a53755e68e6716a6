#include <algorithm>
#include <cstdio>

#include "simsite_internal.hpp"
#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::sim {

using namespace detail;

namespace {

std::string money(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

json* find_product(SiteState& state, const std::string& sku, ApiResponse* err) {
    json* product = find_item(state.data()["products"], "sku", sku);
    if (!product) *err = error_response(404, "not_found", "no product '" + sku + "'");
    return product;
}

json* find_order(SiteState& state, const std::string& id, ApiResponse* err) {
    json* order = find_item(state.data()["orders"], "id", id);
    if (!order) *err = error_response(404, "not_found", "no order '" + id + "'");
    return order;
}

json& cart_for(SiteState& state, const std::string& username) {
    json& carts = state.data()["carts"];
    for (auto& cart : carts) {
        if (cart["user"] == username) return cart;
    }
    carts.push_back(json{{"user", username}, {"items", json::array()}, {"total", 0.0}});
    return carts.back();
}

void recompute_cart(json& cart) {
    double total = 0.0;
    for (const auto& item : cart["items"]) {
        total += item.value("price", 0.0) * item.value("qty", 1);
    }
    cart["total"] = total;
}

json sorted_reviews(const json& reviews) {
    std::vector<json> rows(reviews.begin(), reviews.end());
    std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
        return a.value("created_at", "") > b.value("created_at", "");
    });
    json out = json::array();
    for (auto& row : rows) out.push_back(std::move(row));
    return out;
}

std::vector<RouteSpec> shop_routes() {
    std::vector<RouteSpec> routes;

    add_route(routes, "GET", "/api/version", false, [](SiteState& state, const RouteParams&) {
        return ApiResponse{200, json{{"version", state.data().value("version", "")}}};
    });

    add_route(routes, "GET", "/api/user", true, [](SiteState&, const RouteParams& p) {
        return ApiResponse{200, json{{"username", p.session.username}, {"role", "admin"}}};
    });

    add_route(routes, "GET", "/api/search", false, [](SiteState& state, const RouteParams& p) {
        auto q_it = p.query.find("q");
        if (q_it == p.query.end() || q_it->second.empty()) {
            return error_response(400, "bad_request", "missing query parameter 'q'");
        }
        std::string q = to_lower(q_it->second);
        json hits = json::array();
        for (const auto& product : state.data()["products"]) {
            std::string hay = to_lower(product.value("name", "") + " " +
                                       product.value("description", "") + " " +
                                       product.value("sku", ""));
            if (hay.find(q) != std::string::npos) hits.push_back(product);
        }
        return paginated(hits, p);
    });

    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/products";
        spec.leaf = "products";
        spec.item_param = "sku";
        spec.id_field = "sku";
        spec.flags = "LCGUD";
        spec.create_defaults = json{{"name", ""}, {"category", ""}, {"price", 0.0},
                                    {"stock", 0}, {"description", ""},
                                    {"reviews", json::array()}};
        add_crud(routes, spec);
    }

    add_route(routes, "GET", "/api/products/{sku}/reviews", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* product = find_product(state, p.path.at("sku"), &err);
                  if (!product) return err;
                  return paginated(sorted_reviews((*product)["reviews"]), p);
              });

    add_crud(routes, {"/api/categories", {}, "categories", "id", "id", "LCGUD"});

    add_route(routes, "GET", "/api/categories/{id}/products", false,
              [](SiteState& state, const RouteParams& p) {
                  if (!find_item(state.data()["categories"], "id", p.path.at("id"))) {
                      return error_response(404, "not_found", "no such category");
                  }
                  json hits = json::array();
                  for (const auto& product : state.data()["products"]) {
                      if (product["category"] == p.path.at("id")) hits.push_back(product);
                  }
                  return paginated(hits, p);
              });

    add_route(routes, "GET", "/api/orders", false, [](SiteState& state, const RouteParams& p) {
        auto status = p.query.find("status");
        if (status == p.query.end()) {
            return paginated(state.data()["orders"], p);
        }
        json hits = json::array();
        for (const auto& order : state.data()["orders"]) {
            if (order["status"] == status->second) hits.push_back(order);
        }
        return paginated(hits, p);
    });

    add_route(routes, "POST", "/api/orders", true, [](SiteState& state, const RouteParams& p) {
        if (!p.body.is_object()) {
            return error_response(400, "bad_request", "body must be a JSON object");
        }
        json& orders = state.data()["orders"];
        long long id = 1001;
        for (const auto& order : orders) id = std::max(id, order.value("id", 0LL) + 1);
        json order = p.body;
        order["id"] = id;
        order["status"] = "pending";
        if (!order.contains("items")) order["items"] = json::array();
        orders.push_back(order);
        state.log_mutation("create", "/api/orders", json{{"id", id}}, p.session.username);
        return ApiResponse{201, order};
    });

    add_crud(routes, {"/api/orders", {}, "orders", "id", "id", "GUD"});

    add_route(routes, "GET", "/api/orders/{id}/items", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* order = find_order(state, p.path.at("id"), &err);
                  if (!order) return err;
                  return paginated((*order)["items"], p);
              });

    for (const char* op : {"ship", "cancel"}) {
        std::string to_status = std::string(op) == "ship" ? "shipped" : "canceled";
        add_route(routes, "POST", std::string("/api/orders/{id}/") + op, true,
                  [to_status](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* order = find_order(state, p.path.at("id"), &err);
                      if (!order) return err;
                      if (order->value("status", "") != "pending") {
                          return error_response(409, "conflict", "order is not pending");
                      }
                      (*order)["status"] = to_status;
                      state.log_mutation("update", "/api/orders/{id}",
                                         json{{"id", (*order)["id"]}, {"status", to_status}},
                                         p.session.username);
                      return ApiResponse{200, *order};
                  });
    }

    add_crud(routes, {"/api/customers", {}, "customers", "id", "id", "LCGUD"});

    add_route(routes, "GET", "/api/customers/{id}/orders", false,
              [](SiteState& state, const RouteParams& p) {
                  if (!find_item(state.data()["customers"], "id", p.path.at("id"))) {
                      return error_response(404, "not_found", "no such customer");
                  }
                  json hits = json::array();
                  for (const auto& order : state.data()["orders"]) {
                      if (id_text(order["customer"]) == p.path.at("id")) hits.push_back(order);
                  }
                  return paginated(hits, p);
              });

    add_route(routes, "GET", "/api/cart", true, [](SiteState& state, const RouteParams& p) {
        return ApiResponse{200, cart_for(state, p.session.username)};
    });

    add_route(routes, "POST", "/api/cart/items", true,
              [](SiteState& state, const RouteParams& p) {
                  if (!p.body.is_object() || !p.body.contains("sku")) {
                      return error_response(400, "bad_request", "body must include 'sku'");
                  }
                  ApiResponse err;
                  json* product = find_product(state, p.body["sku"].get<std::string>(), &err);
                  if (!product) return err;
                  json& cart = cart_for(state, p.session.username);
                  long long item_id = 1;
                  for (const auto& item : cart["items"]) {
                      item_id = std::max(item_id, item.value("item_id", 0LL) + 1);
                  }
                  cart["items"].push_back(json{{"item_id", item_id},
                                               {"sku", (*product)["sku"]},
                                               {"qty", p.body.value("qty", 1)},
                                               {"price", (*product)["price"]}});
                  recompute_cart(cart);
                  state.log_mutation("create", "/api/cart/items",
                                     json{{"sku", (*product)["sku"]}}, p.session.username);
                  return ApiResponse{201, cart};
              });

    add_route(routes, "DELETE", "/api/cart/items/{item_id}", true,
              [](SiteState& state, const RouteParams& p) {
                  json& cart = cart_for(state, p.session.username);
                  json& items = cart["items"];
                  for (std::size_t i = 0; i < items.size(); ++i) {
                      if (id_text(items[i]["item_id"]) == p.path.at("item_id")) {
                          items.erase(i);
                          recompute_cart(cart);
                          state.log_mutation("delete", "/api/cart/items/{item_id}",
                                             json{{"item_id", p.path.at("item_id")}},
                                             p.session.username);
                          return ApiResponse{200, cart};
                      }
                  }
                  return error_response(404, "not_found", "no such cart item");
              });

    add_crud(routes, {"/api/coupons", {}, "coupons", "code", "code", "LCGD"});

    return routes;
}

// ---- pages ----

browse::Element shop_home(const SiteState& state, const RouteParams&) {
    browse::Element root = el("generic", "Shop");
    root.children.push_back(heading("Fixture Shop"));
    root.children.push_back(link("Admin: review moderation", "/admin/reviews"));
    root.children.push_back(link("Admin: orders", "/admin/orders"));
    browse::Element list = el("list", "products");
    for (const auto& product : state.data()["products"]) {
        std::string sku = id_text(product["sku"]);
        browse::Element item = el("listitem", sku);
        item.children.push_back(link(product.value("name", sku), "/product/" + sku));
        item.children.push_back(text("$" + money(product.value("price", 0.0))));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element shop_product(const SiteState& state, const RouteParams& p) {
    const json* product = find_item(state.data()["products"], "sku", p.path.at("sku"));
    browse::Element root = el("generic", "product");
    if (!product) {
        root.children.push_back(heading("404 Not Found"));
        root.children.push_back(text("No product " + p.path.at("sku")));
        return root;
    }
    std::string sku = p.path.at("sku");
    root.children.push_back(heading(product->value("name", sku)));
    root.children.push_back(text("$" + money(product->value("price", 0.0))));
    root.children.push_back(text(product->value("description", "")));
    root.children.push_back(text(std::to_string(product->value("stock", 0)) + " in stock"));
    root.children.push_back(button("Add to cart",
                                   json{{"method", "POST"},
                                        {"path", "/product/" + sku + "/add-to-cart"}}));
    root.children.push_back(heading("Reviews"));
    browse::Element list = el("list", "reviews");
    for (const auto& review : sorted_reviews((*product)["reviews"])) {
        browse::Element item = el("listitem", "review " + id_text(review["id"]));
        item.children.push_back(text(std::to_string(review.value("rating", 0)) + "/5 " +
                                     review.value("text", "")));
        item.children.push_back(text("by " + review.value("author", "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element shop_admin_reviews(const SiteState& state, const RouteParams& p) {
    browse::Element root = el("generic", "review moderation");
    root.children.push_back(heading("Review moderation"));
    std::string filter = p.query.count("product") ? p.query.at("product") : "";
    int count = 0;
    browse::Element list = el("list", "all reviews");
    for (const auto& product : state.data()["products"]) {
        if (!filter.empty() && product["sku"] != filter) continue;
        for (const auto& review : product["reviews"]) {
            ++count;
            browse::Element item = el("listitem", "review " + id_text(review["id"]));
            item.children.push_back(text(product.value("name", "") + " - " +
                                         std::to_string(review.value("rating", 0)) + "/5"));
            item.children.push_back(text(review.value("text", "")));
            item.children.push_back(text("by " + review.value("author", "")));
            item.children.push_back(button(
                "Delete review " + id_text(review["id"]),
                json{{"method", "POST"},
                     {"path", "/admin/reviews/" + id_text(review["id"]) + "/delete"}}));
            list.children.push_back(std::move(item));
        }
    }
    root.children.insert(root.children.begin() + 1, text(std::to_string(count) + " reviews"));
    root.children.push_back(std::move(list));
    return root;
}

browse::Element shop_admin_orders(const SiteState& state, const RouteParams&) {
    browse::Element root = el("generic", "orders");
    root.children.push_back(heading("Orders"));
    browse::Element list = el("list", "orders");
    for (const auto& order : state.data()["orders"]) {
        browse::Element item = el("listitem", "order " + id_text(order["id"]));
        item.children.push_back(text("#" + id_text(order["id"]) + " " +
                                     order.value("status", "") + " $" +
                                     money(order.value("total", 0.0))));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element shop_cart(const SiteState& state, const RouteParams& p) {
    browse::Element root = el("generic", "cart");
    root.children.push_back(heading("Your cart"));
    const json* cart = nullptr;
    for (const auto& c : state.data()["carts"]) {
        if (c["user"] == p.session.username) cart = &c;
    }
    if (!cart || (*cart)["items"].empty()) {
        root.children.push_back(text("The cart is empty."));
        return root;
    }
    browse::Element list = el("list", "cart items");
    for (const auto& item : (*cart)["items"]) {
        browse::Element row = el("listitem", "item " + id_text(item["item_id"]));
        row.children.push_back(text(item.value("sku", "") + " x" +
                                    std::to_string(item.value("qty", 1)) + " $" +
                                    money(item.value("price", 0.0))));
        list.children.push_back(std::move(row));
    }
    root.children.push_back(std::move(list));
    root.children.push_back(text("total $" + money(cart->value("total", 0.0))));
    return root;
}

std::string shop_add_to_cart_submit(SiteState& state, const RouteParams& p) {
    ApiResponse err;
    json* product = find_product(state, p.path.at("sku"), &err);
    if (!product) return "/";
    json& cart = cart_for(state, p.session.username);
    long long item_id = 1;
    for (const auto& item : cart["items"]) {
        item_id = std::max(item_id, item.value("item_id", 0LL) + 1);
    }
    cart["items"].push_back(json{{"item_id", item_id},
                                 {"sku", (*product)["sku"]},
                                 {"qty", 1},
                                 {"price", (*product)["price"]}});
    recompute_cart(cart);
    state.log_mutation("create", "/product/{sku}/add-to-cart",
                       json{{"sku", (*product)["sku"]}}, p.session.username);
    return "/cart";
}

std::string shop_delete_review_submit(SiteState& state, const RouteParams& p) {
    const std::string& rid = p.path.at("id");
    for (auto& product : state.data()["products"]) {
        json& reviews = product["reviews"];
        for (std::size_t i = 0; i < reviews.size(); ++i) {
            if (id_text(reviews[i]["id"]) == rid) {
                reviews.erase(i);
                state.log_mutation("delete", "/admin/reviews/{id}/delete",
                                   json{{"id", rid}, {"sku", product["sku"]}},
                                   p.session.username);
                return "/admin/reviews";
            }
        }
    }
    return "/admin/reviews";
}

} // namespace

SiteFixture make_shop(const std::string& data_dir) {
    SiteFixture fixture;
    fixture.site_id = "shop";
    fixture.tier = catalog::QualityTier::fair;
    fixture.seed = load_seed(data_dir + "/seeds/shop.json");
    fixture.docs_text = slurp_file(data_dir + "/docs/shop_openapi.yaml");
    fixture.docs_format = "openapi";
    fixture.username = "admin";
    fixture.access_token = "tok-shop-2f8c1b9e6d43";
    fixture.api_routes = shop_routes();

    fixture.page_routes = {
        {"/", shop_home},
        {"/product/{sku}", shop_product},
        {"/admin/reviews", shop_admin_reviews},
        {"/admin/orders", shop_admin_orders},
        {"/cart", shop_cart},
    };
    fixture.page_submits = {
        {"POST", "/product/{sku}/add-to-cart", shop_add_to_cart_submit},
        {"POST", "/admin/reviews/{id}/delete", shop_delete_review_submit},
    };
    return fixture;
}

} // namespace webagents::sim
